#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pufatt/delay.hpp"

namespace pufatt {

// One feed-forward loop: the bit latched by an intermediate arbiter placed
// after `tap_stage` overwrites the challenge at every index in
// `dest_indices`. All destinations must lie strictly after the tap.
struct FfLoop {
    int tap_stage = 0;
    std::vector<int> dest_indices;

    bool operator==(const FfLoop&) const = default;
};

struct XorTopology {
    int l = 1;
    bool operator==(const XorTopology&) const = default;
};

struct OaxTopology {
    int x = 0;
    int y = 0;
    int z = 0;
    bool operator==(const OaxTopology&) const = default;
};

struct InterposeTopology {
    int x = 1;
    int y = 1;
    int pos = -1;  // insertion index in [0, n]; -1 means n/2
    bool operator==(const InterposeTopology&) const = default;
};

struct FeedForwardTopology {
    std::vector<FfLoop> loops;
    bool operator==(const FeedForwardTopology&) const = default;
};

struct XorFeedForwardTopology {
    int l = 1;
    std::vector<FfLoop> loops;  // shared per chain
    bool operator==(const XorFeedForwardTopology&) const = default;
};

using Topology =
    std::variant<XorTopology, OaxTopology, InterposeTopology, FeedForwardTopology, XorFeedForwardTopology>;

struct PufSpec {
    int n = 64;
    Topology topology = XorTopology{1};

    int chain_count() const;
    // Interpose insertion index with the n/2 default applied.
    int interpose_pos() const;
    std::string kind_name() const;  // "xor", "oax", "interpose", "ff", "xor_ff"
    // Throws std::invalid_argument naming the violated constraint.
    void validate() const;

    bool operator==(const PufSpec&) const = default;
};

// An instantiated composite PUF: one weight vector per component chain.
// Interpose y-layer chains are one stage longer than the others.
struct PufInstance {
    PufSpec spec;
    std::vector<ApufWeights> chains;
    std::uint64_t seed = 0;
};

PufInstance instantiate(const PufSpec& spec, double mu, double sigma, std::uint64_t seed);

// Per-chain response bits before the combining logic. For interpose
// instances the x-layer bits come first, then the y-layer bits evaluated on
// the interposed challenge. Noisy overloads draw an independent weight
// perturbation per chain per call.
std::vector<Bit> component_responses(const PufInstance& inst, const Challenge& c);
std::vector<Bit> component_responses(const PufInstance& inst, const Challenge& c, const NoiseSpec& noise,
                                     Rng& rng);

Bit combine_xor(std::span<const Bit> bits);
Bit combine_oax(std::span<const Bit> or_bits, std::span<const Bit> and_bits, std::span<const Bit> xor_bits);

// Combines already-computed component bits according to the topology.
Bit combine_components(const PufSpec& spec, std::span<const Bit> bits);

Bit ipuf_respond(const PufInstance& inst, const Challenge& c);
Bit ipuf_respond(const PufInstance& inst, const Challenge& c, const NoiseSpec& noise, Rng& rng);

// Feed-forward chain evaluation: loops are resolved in ascending tap order,
// each intermediate bit rewriting the challenge before deeper taps fire.
Bit ff_respond(const ApufWeights& chain, const std::vector<FfLoop>& loops, const Challenge& c);
Bit ff_respond(const ApufWeights& chain, const std::vector<FfLoop>& loops, const Challenge& c,
               const NoiseSpec& noise, Rng& rng);

Bit respond_composite(const PufInstance& inst, const Challenge& c);
Bit respond_composite(const PufInstance& inst, const Challenge& c, const NoiseSpec& noise, Rng& rng);

// Fraction of 1-responses over `sample_size` uniformly random challenges.
double uniformity(const PufInstance& inst, std::size_t sample_size, Rng& rng);

// Shifts each chain's final weight so its per-chain 1-fraction over a fixed
// random challenge sample lands within +-0.01 of `target`. Target must lie
// in [0.5, 0.99]; throws if the bisection cannot reach it.
PufInstance bias_instance(const PufInstance& inst, double target_uniformity, Rng& rng);

}  // namespace pufatt
