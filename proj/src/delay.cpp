#include "pufatt/delay.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pufatt {

ParityVector parity_vector(const Challenge& c) {
    if (c.empty()) throw std::invalid_argument("parity_vector: empty challenge");
    const std::size_t n = c.size();
    ParityVector phi(n + 1);
    phi[n] = 1.0;
    double acc = 1.0;
    for (std::size_t i = n; i-- > 0;) {
        const Bit bit = c[i];
        if (bit > 1) throw std::invalid_argument("parity_vector: challenge entries must be 0 or 1");
        acc *= 1.0 - 2.0 * static_cast<double>(bit);
        phi[i] = acc;
    }
    return phi;
}

ApufWeights sample_apuf_weights(int n, double mu, double sigma, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_apuf_weights: stage count must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("sample_apuf_weights: sigma must be > 0");
    ApufWeights w(static_cast<std::size_t>(n) + 1);
    for (auto& entry : w) entry = rng.next_gaussian(mu, sigma);
    return w;
}

double delay_difference(const ApufWeights& w, const ParityVector& phi) {
    if (w.size() != phi.size())
        throw std::invalid_argument("delay_difference: weight length " + std::to_string(w.size()) +
                                    " does not match parity length " + std::to_string(phi.size()));
    double delta = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) delta += w[i] * phi[i];
    return delta;
}

double delay_difference(const ApufWeights& w, const Challenge& c) {
    if (w.size() != c.size() + 1)
        throw std::invalid_argument("delay_difference: weight length " + std::to_string(w.size()) +
                                    " does not match challenge length " + std::to_string(c.size()));
    const std::size_t n = c.size();
    double delta = w[n];
    double acc = 1.0;
    for (std::size_t i = n; i-- > 0;) {
        acc *= 1.0 - 2.0 * static_cast<double>(c[i]);
        delta += w[i] * acc;
    }
    return delta;
}

Bit response_from_delay(double delta) { return delta < 0.0 ? Bit{1} : Bit{0}; }

Bit respond(const ApufWeights& w, const Challenge& c) {
    if (c.empty()) throw std::invalid_argument("respond: empty challenge");
    return response_from_delay(delay_difference(w, c));
}

ApufWeights perturb_weights(const ApufWeights& w, const NoiseSpec& noise, Rng& rng) {
    if (noise.sigma < 0.0) throw std::invalid_argument("perturb_weights: sigma must be >= 0");
    ApufWeights noisy(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) noisy[i] = w[i] + rng.next_gaussian(noise.mu, noise.sigma);
    return noisy;
}

Bit respond_noisy(const ApufWeights& w, const Challenge& c, const NoiseSpec& noise, Rng& rng) {
    if (noise.sigma == 0.0 && noise.mu == 0.0) return respond(w, c);
    return respond(perturb_weights(w, noise, rng), c);
}

double partial_delay_difference(const ApufWeights& w, const Challenge& c, int s) {
    if (s < 0 || static_cast<std::size_t>(s) + 1 >= w.size() || static_cast<std::size_t>(s) > c.size())
        throw std::invalid_argument("partial_delay_difference: stage index out of range");
    double delta = w[static_cast<std::size_t>(s)];
    double acc = 1.0;
    for (int i = s; i-- > 0;) {
        acc *= 1.0 - 2.0 * static_cast<double>(c[static_cast<std::size_t>(i)]);
        delta += w[static_cast<std::size_t>(i)] * acc;
    }
    return delta;
}

}  // namespace pufatt
