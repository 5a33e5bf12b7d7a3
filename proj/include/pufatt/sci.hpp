#pragma once

#include <span>
#include <vector>

#include "pufatt/puf.hpp"

namespace pufatt {

// Side-channel label configuration. Power counts component 1-responses;
// reliability counts 1s over m repeated noisy measurements, binned into cn
// contiguous classes.
struct SciConfig {
    bool use_power = false;
    bool use_reliability = false;
    int m = 10;
    int cn = 11;
    bool noisy_power = false;  // default: power from noise-free component bits

    void validate() const;
};

// One labelled observation. Absent labels are -1.
struct SciRecord {
    Challenge challenge;
    Bit response = 0;
    int power = -1;
    int rel_count = -1;
    int rel_class = -1;

    bool operator==(const SciRecord&) const = default;
};

// Number of 1 entries among the component bits; the label space has L+1
// values for L chains.
int power_label(std::span<const Bit> component_bits);

// Count of 1 final responses over m independent noisy evaluations.
int measure_reliability(const PufInstance& inst, const Challenge& c, int m, const NoiseSpec& noise, Rng& rng);

// Equal-width binning of counts in [0, m] into cn classes; identity when
// cn = m + 1.
int bin_count(int count, int m, int cn);

std::vector<double> one_hot(int class_index, int class_count);

// Majority vote over m repeated noisy measurements; m must be odd.
Bit majority_vote_response(const PufInstance& inst, const Challenge& c, int m, const NoiseSpec& noise,
                           Rng& rng);

// Fraction of challenges with at least one of m noisy responses differing
// from the noise-free reference; counts in [1, m-1] mark a challenge as
// unstable, matching the reliability-class statistics.
double unreliability(const PufInstance& inst, std::size_t sample_size, int m, const NoiseSpec& noise,
                     Rng& rng);

}  // namespace pufatt
