#include "pufatt/puf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pufatt {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_loops(const std::vector<FfLoop>& loops, int n) {
    std::set<int> seen_dests;
    for (const auto& loop : loops) {
        if (loop.tap_stage < 1 || loop.tap_stage > n - 1)
            throw std::invalid_argument("ff loop: tap stage must lie in [1, n-1]");
        if (loop.dest_indices.empty()) throw std::invalid_argument("ff loop: empty destination list");
        for (int dest : loop.dest_indices) {
            if (dest <= loop.tap_stage)
                throw std::invalid_argument("ff loop: destination index must exceed the tap stage");
            if (dest >= n) throw std::invalid_argument("ff loop: destination index beyond challenge length");
            if (!seen_dests.insert(dest).second)
                throw std::invalid_argument("ff loop: destination index used by more than one loop");
        }
    }
}

// Loops sorted by tap stage; evaluation order is part of the contract.
std::vector<FfLoop> sorted_loops(const std::vector<FfLoop>& loops) {
    std::vector<FfLoop> out = loops;
    std::stable_sort(out.begin(), out.end(),
                     [](const FfLoop& a, const FfLoop& b) { return a.tap_stage < b.tap_stage; });
    return out;
}

// Assumes loops already ordered by tap stage.
Bit ff_respond_ordered(const ApufWeights& chain, const std::vector<FfLoop>& loops, const Challenge& c) {
    if (chain.size() != c.size() + 1)
        throw std::invalid_argument("ff_respond: weight/challenge length mismatch");
    if (loops.empty()) return respond(chain, c);
    Challenge rewritten = c;
    for (const auto& loop : loops) {
        const Bit tap_bit = response_from_delay(partial_delay_difference(chain, rewritten, loop.tap_stage));
        for (int dest : loop.dest_indices) rewritten[static_cast<std::size_t>(dest)] = tap_bit;
    }
    return respond(chain, rewritten);
}

std::vector<Bit> component_responses_impl(const PufInstance& inst, const Challenge& c,
                                          const NoiseSpec* noise, Rng* rng) {
    const PufSpec& spec = inst.spec;
    if (static_cast<int>(c.size()) != spec.n)
        throw std::invalid_argument("component_responses: challenge length does not match stage count");

    auto chain_weights = [&](std::size_t idx) -> ApufWeights {
        if (noise != nullptr && noise->sigma != 0.0) return perturb_weights(inst.chains[idx], *noise, *rng);
        return inst.chains[idx];
    };

    std::vector<Bit> bits;
    bits.reserve(inst.chains.size());

    if (const auto* ip = std::get_if<InterposeTopology>(&spec.topology)) {
        const std::size_t x = static_cast<std::size_t>(ip->x);
        for (std::size_t i = 0; i < x; ++i) bits.push_back(respond(chain_weights(i), c));
        Bit r_x = combine_xor(bits);
        Challenge interposed = c;
        interposed.insert(interposed.begin() + spec.interpose_pos(), r_x);
        for (std::size_t i = x; i < inst.chains.size(); ++i)
            bits.push_back(respond(chain_weights(i), interposed));
        return bits;
    }

    const std::vector<FfLoop>* loops = nullptr;
    if (const auto* ff = std::get_if<FeedForwardTopology>(&spec.topology)) loops = &ff->loops;
    if (const auto* xff = std::get_if<XorFeedForwardTopology>(&spec.topology)) loops = &xff->loops;

    if (loops != nullptr) {
        const std::vector<FfLoop> ordered = sorted_loops(*loops);
        for (std::size_t i = 0; i < inst.chains.size(); ++i)
            bits.push_back(ff_respond_ordered(chain_weights(i), ordered, c));
    } else {
        for (std::size_t i = 0; i < inst.chains.size(); ++i) bits.push_back(respond(chain_weights(i), c));
    }
    return bits;
}

}  // namespace

int PufSpec::chain_count() const {
    return std::visit(Overloaded{[](const XorTopology& t) { return t.l; },
                                 [](const OaxTopology& t) { return t.x + t.y + t.z; },
                                 [](const InterposeTopology& t) { return t.x + t.y; },
                                 [](const FeedForwardTopology&) { return 1; },
                                 [](const XorFeedForwardTopology& t) { return t.l; }},
                      topology);
}

int PufSpec::interpose_pos() const {
    const auto* ip = std::get_if<InterposeTopology>(&topology);
    if (ip == nullptr) throw std::logic_error("interpose_pos: not an interpose spec");
    return ip->pos < 0 ? n / 2 : ip->pos;
}

std::string PufSpec::kind_name() const {
    return std::visit(Overloaded{[](const XorTopology&) { return std::string("xor"); },
                                 [](const OaxTopology&) { return std::string("oax"); },
                                 [](const InterposeTopology&) { return std::string("interpose"); },
                                 [](const FeedForwardTopology&) { return std::string("ff"); },
                                 [](const XorFeedForwardTopology&) { return std::string("xor_ff"); }},
                      topology);
}

void PufSpec::validate() const {
    if (n < 1) throw std::invalid_argument("puf spec: stage count must be >= 1");
    std::visit(Overloaded{[&](const XorTopology& t) {
                              if (t.l < 1) throw std::invalid_argument("puf spec: xor count must be >= 1");
                          },
                          [&](const OaxTopology& t) {
                              if (t.x < 0 || t.y < 0 || t.z < 0)
                                  throw std::invalid_argument("puf spec: oax block sizes must be >= 0");
                              if (t.x + t.y + t.z < 1)
                                  throw std::invalid_argument("puf spec: oax needs at least one chain");
                          },
                          [&](const InterposeTopology& t) {
                              if (t.x < 1 || t.y < 1)
                                  throw std::invalid_argument("puf spec: interpose layers must be >= 1");
                              if (t.pos != -1 && (t.pos < 0 || t.pos > n))
                                  throw std::invalid_argument("puf spec: interpose position must lie in [0, n]");
                          },
                          [&](const FeedForwardTopology& t) { validate_loops(t.loops, n); },
                          [&](const XorFeedForwardTopology& t) {
                              if (t.l < 1) throw std::invalid_argument("puf spec: xor count must be >= 1");
                              validate_loops(t.loops, n);
                          }},
               topology);
}

PufInstance instantiate(const PufSpec& spec, double mu, double sigma, std::uint64_t seed) {
    spec.validate();
    PufInstance inst;
    inst.spec = spec;
    inst.seed = seed;

    const int count = spec.chain_count();
    int x_chains = count;  // chains with n stages; remainder are y-layer chains
    if (const auto* ip = std::get_if<InterposeTopology>(&spec.topology)) x_chains = ip->x;

    inst.chains.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng chain_rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const int stages = i < x_chains ? spec.n : spec.n + 1;
        inst.chains.push_back(sample_apuf_weights(stages, mu, sigma, chain_rng));
    }
    return inst;
}

std::vector<Bit> component_responses(const PufInstance& inst, const Challenge& c) {
    return component_responses_impl(inst, c, nullptr, nullptr);
}

std::vector<Bit> component_responses(const PufInstance& inst, const Challenge& c, const NoiseSpec& noise,
                                     Rng& rng) {
    return component_responses_impl(inst, c, &noise, &rng);
}

Bit combine_xor(std::span<const Bit> bits) {
    if (bits.empty()) throw std::invalid_argument("combine_xor: empty input");
    Bit acc = 0;
    for (Bit b : bits) acc ^= b;
    return acc;
}

Bit combine_oax(std::span<const Bit> or_bits, std::span<const Bit> and_bits, std::span<const Bit> xor_bits) {
    if (or_bits.empty() && and_bits.empty() && xor_bits.empty())
        throw std::invalid_argument("combine_oax: all blocks empty");
    // An empty block contributes the XOR identity 0.
    Bit r_or = 0;
    for (Bit b : or_bits) r_or |= b;
    Bit r_and = 0;
    if (!and_bits.empty()) {
        r_and = 1;
        for (Bit b : and_bits) r_and &= b;
    }
    Bit r_xor = 0;
    for (Bit b : xor_bits) r_xor ^= b;
    return r_or ^ r_and ^ r_xor;
}

Bit combine_components(const PufSpec& spec, std::span<const Bit> bits) {
    if (bits.size() != static_cast<std::size_t>(spec.chain_count()))
        throw std::invalid_argument("combine_components: bit count does not match chain count");
    return std::visit(
        Overloaded{[&](const XorTopology&) { return combine_xor(bits); },
                   [&](const OaxTopology& t) {
                       const std::size_t x = static_cast<std::size_t>(t.x);
                       const std::size_t y = static_cast<std::size_t>(t.y);
                       return combine_oax(bits.subspan(0, x), bits.subspan(x, y), bits.subspan(x + y));
                   },
                   [&](const InterposeTopology& t) {
                       return combine_xor(bits.subspan(static_cast<std::size_t>(t.x)));
                   },
                   [&](const FeedForwardTopology&) { return bits[0]; },
                   [&](const XorFeedForwardTopology&) { return combine_xor(bits); }},
        spec.topology);
}

Bit ipuf_respond(const PufInstance& inst, const Challenge& c) {
    if (!std::holds_alternative<InterposeTopology>(inst.spec.topology))
        throw std::invalid_argument("ipuf_respond: instance is not an interpose composite");
    return combine_components(inst.spec, component_responses(inst, c));
}

Bit ipuf_respond(const PufInstance& inst, const Challenge& c, const NoiseSpec& noise, Rng& rng) {
    if (!std::holds_alternative<InterposeTopology>(inst.spec.topology))
        throw std::invalid_argument("ipuf_respond: instance is not an interpose composite");
    return combine_components(inst.spec, component_responses(inst, c, noise, rng));
}

Bit ff_respond(const ApufWeights& chain, const std::vector<FfLoop>& loops, const Challenge& c) {
    validate_loops(loops, static_cast<int>(c.size()));
    return ff_respond_ordered(chain, sorted_loops(loops), c);
}

Bit ff_respond(const ApufWeights& chain, const std::vector<FfLoop>& loops, const Challenge& c,
               const NoiseSpec& noise, Rng& rng) {
    validate_loops(loops, static_cast<int>(c.size()));
    if (noise.sigma == 0.0 && noise.mu == 0.0) return ff_respond_ordered(chain, sorted_loops(loops), c);
    return ff_respond_ordered(perturb_weights(chain, noise, rng), sorted_loops(loops), c);
}

Bit respond_composite(const PufInstance& inst, const Challenge& c) {
    return combine_components(inst.spec, component_responses(inst, c));
}

Bit respond_composite(const PufInstance& inst, const Challenge& c, const NoiseSpec& noise, Rng& rng) {
    return combine_components(inst.spec, component_responses(inst, c, noise, rng));
}

double uniformity(const PufInstance& inst, std::size_t sample_size, Rng& rng) {
    if (sample_size == 0) throw std::invalid_argument("uniformity: sample size must be >= 1");
    std::size_t ones = 0;
    Challenge c(static_cast<std::size_t>(inst.spec.n));
    for (std::size_t k = 0; k < sample_size; ++k) {
        for (auto& bit : c) bit = static_cast<Bit>(rng.next_bit());
        ones += respond_composite(inst, c);
    }
    return static_cast<double>(ones) / static_cast<double>(sample_size);
}

PufInstance bias_instance(const PufInstance& inst, double target_uniformity, Rng& rng) {
    if (target_uniformity < 0.5 || target_uniformity > 0.99)
        throw std::invalid_argument("bias_instance: target uniformity must lie in [0.5, 0.99]");

    constexpr std::size_t kSample = 100000;
    constexpr double kTolerance = 0.01;
    constexpr int kMaxIterations = 80;

    PufInstance biased = inst;
    for (std::size_t chain_idx = 0; chain_idx < biased.chains.size(); ++chain_idx) {
        ApufWeights& w = biased.chains[chain_idx];
        const std::size_t stages = w.size() - 1;

        // Fixed challenge sample per chain so the measured fraction is a
        // deterministic, monotone function of the offset.
        std::vector<Challenge> sample(kSample, Challenge(stages));
        for (auto& c : sample)
            for (auto& bit : c) bit = static_cast<Bit>(rng.next_bit());

        std::vector<double> deltas(kSample);
        for (std::size_t k = 0; k < kSample; ++k) deltas[k] = delay_difference(w, sample[k]);

        // 1-fraction when the final weight is shifted by `offset`: response
        // is 1 iff delta + offset < 0, so larger offsets give fewer ones.
        auto ones_fraction = [&](double offset) {
            std::size_t ones = 0;
            for (double d : deltas) ones += (d + offset < 0.0) ? 1 : 0;
            return static_cast<double>(ones) / static_cast<double>(kSample);
        };

        double spread = 0.0;
        for (double v : w) spread += v * v;
        double lo = -6.0 * std::sqrt(spread);  // ones_fraction(lo) ~ 1
        double hi = 6.0 * std::sqrt(spread);   // ones_fraction(hi) ~ 0
        double offset = 0.0;
        bool reached = false;
        for (int iter = 0; iter < kMaxIterations; ++iter) {
            offset = 0.5 * (lo + hi);
            const double u = ones_fraction(offset);
            if (std::abs(u - target_uniformity) <= kTolerance) {
                reached = true;
                break;
            }
            if (u > target_uniformity)
                lo = offset;
            else
                hi = offset;
        }
        if (!reached)
            throw std::runtime_error("bias_instance: bisection could not reach the target uniformity");
        w[stages] += offset;
    }
    return biased;
}

}  // namespace pufatt
