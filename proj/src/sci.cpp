#include "pufatt/sci.hpp"

#include <stdexcept>

namespace pufatt {

void SciConfig::validate() const {
    if (m < 1) throw std::invalid_argument("sci config: repeated-measurement count must be >= 1");
    if (cn < 2 || cn > m + 1) throw std::invalid_argument("sci config: class count must lie in [2, m+1]");
}

int power_label(std::span<const Bit> component_bits) {
    if (component_bits.empty()) throw std::invalid_argument("power_label: empty component bits");
    int ones = 0;
    for (Bit b : component_bits) ones += b;
    return ones;
}

int measure_reliability(const PufInstance& inst, const Challenge& c, int m, const NoiseSpec& noise,
                        Rng& rng) {
    if (m < 1) throw std::invalid_argument("measure_reliability: m must be >= 1");
    int ones = 0;
    for (int k = 0; k < m; ++k) ones += respond_composite(inst, c, noise, rng);
    return ones;
}

int bin_count(int count, int m, int cn) {
    if (count < 0 || count > m) throw std::invalid_argument("bin_count: count outside [0, m]");
    if (cn < 2 || cn > m + 1) throw std::invalid_argument("bin_count: class count must lie in [2, m+1]");
    return static_cast<int>(static_cast<long long>(count) * cn / (m + 1));
}

std::vector<double> one_hot(int class_index, int class_count) {
    if (class_count < 1) throw std::invalid_argument("one_hot: class count must be >= 1");
    if (class_index < 0 || class_index >= class_count)
        throw std::invalid_argument("one_hot: class index out of range");
    std::vector<double> v(static_cast<std::size_t>(class_count), 0.0);
    v[static_cast<std::size_t>(class_index)] = 1.0;
    return v;
}

Bit majority_vote_response(const PufInstance& inst, const Challenge& c, int m, const NoiseSpec& noise,
                           Rng& rng) {
    if (m < 1 || m % 2 == 0) throw std::invalid_argument("majority_vote_response: m must be odd");
    const int ones = measure_reliability(inst, c, m, noise, rng);
    return ones > m / 2 ? Bit{1} : Bit{0};
}

double unreliability(const PufInstance& inst, std::size_t sample_size, int m, const NoiseSpec& noise,
                     Rng& rng) {
    if (sample_size == 0) throw std::invalid_argument("unreliability: sample size must be >= 1");
    if (m < 1) throw std::invalid_argument("unreliability: m must be >= 1");
    std::size_t unstable = 0;
    Challenge c(static_cast<std::size_t>(inst.spec.n));
    for (std::size_t k = 0; k < sample_size; ++k) {
        for (auto& bit : c) bit = static_cast<Bit>(rng.next_bit());
        const Bit reference = respond_composite(inst, c);
        const int ones = measure_reliability(inst, c, m, noise, rng);
        const int expected = reference ? m : 0;
        if (ones != expected) ++unstable;
    }
    return static_cast<double>(unstable) / static_cast<double>(sample_size);
}

}  // namespace pufatt
