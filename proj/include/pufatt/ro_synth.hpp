#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pufatt/delay.hpp"

namespace pufatt {

// Measured ring-oscillator frequencies keyed by device, oscillator index,
// temperature and repetition. Loaded from CSV with header
// `device,ro,temp_c,rep,freq_hz`.
class RoFrequencyTable {
public:
    struct Key {
        std::string device;
        int ro = 0;
        int temp_c = 0;
        int rep = 0;
        auto operator<=>(const Key&) const = default;
    };

    void insert(const Key& key, double freq_hz);
    double frequency(const Key& key) const;  // throws if missing
    bool contains(const Key& key) const;
    std::size_t size() const { return entries_.size(); }

    // Distinct oscillator indices available for a device at a temperature,
    // sorted ascending.
    std::vector<int> oscillators(const std::string& device, int temp_c) const;
    // Distinct repetition indices for one oscillator, sorted ascending.
    std::vector<int> repetitions(const std::string& device, int ro, int temp_c) const;

private:
    std::map<Key, double> entries_;
};

// Segment delays of one stage: reciprocals of four oscillator frequencies.
struct StageDelays {
    double t13 = 0.0;
    double t14 = 0.0;
    double t23 = 0.0;
    double t24 = 0.0;

    double cross() const { return t14 - t23; }
    double uncross() const { return t13 - t24; }
};

RoFrequencyTable load_table(const std::string& path);

// Four oscillator indices per stage, in t13, t14, t23, t24 order.
// A seeded shuffle of the oscillators available for the device.
std::vector<int> random_assignment(const RoFrequencyTable& table, const std::string& device, int temp_c,
                                   int n, std::uint64_t seed);

std::vector<StageDelays> stage_delays(const RoFrequencyTable& table, const std::string& device, int temp_c,
                                      int rep, const std::vector<int>& assignment);

// Per-stage delays averaged over every repetition at the temperature.
std::vector<StageDelays> mean_stage_delays(const RoFrequencyTable& table, const std::string& device,
                                           int temp_c, const std::vector<int>& assignment);

// Weight vector of an n-stage chain from per-stage cross/uncross delay
// differences.
ApufWeights weights_from_delays(const std::vector<StageDelays>& stages);

ApufWeights synthesize_weights(const RoFrequencyTable& table, const std::string& device, int temp_c, int rep,
                               const std::vector<int>& assignment);

// Two-signal arrival-time evaluation through the stage network; the
// independent route to the same response sign.
double path_delay_difference(const std::vector<StageDelays>& stages, const Challenge& c);

// Response from repetition-averaged frequencies at the reference
// temperature.
Bit reference_response(const RoFrequencyTable& table, const std::string& device, int ref_temp,
                       const std::vector<int>& assignment, const Challenge& c);

// Count of 1 responses over the first m repetitions at `meas_temp`. The
// reference response at `ref_temp` must exist (it anchors the reliability
// comparison) but does not enter the count.
int reliability_from_repeats(const RoFrequencyTable& table, const std::string& device, int ref_temp,
                             int meas_temp, const std::vector<int>& assignment, const Challenge& c, int m);

}  // namespace pufatt
