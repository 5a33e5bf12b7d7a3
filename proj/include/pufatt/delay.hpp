#pragma once

#include <cstdint>
#include <vector>

#include "pufatt/rng.hpp"

namespace pufatt {

using Bit = std::uint8_t;

// A challenge is a vector of n bits, each exactly 0 or 1.
using Challenge = std::vector<Bit>;

// Parity (feature) vector of a challenge: n+1 entries, each -1 or +1, last
// entry always +1. An arbiter chain's delay difference is linear in it.
using ParityVector = std::vector<double>;

// Delay-difference weights of one arbiter chain, length n+1 for n stages.
using ApufWeights = std::vector<double>;

// Per-query Gaussian perturbation applied to a chain's weight vector.
struct NoiseSpec {
    double mu = 0.0;
    double sigma = 0.0;  // >= 0; 0 disables noise
};

// phi[i] = prod_{j=i..n-1} (1 - 2 c[j]), phi[n] = 1. Throws on empty input.
ParityVector parity_vector(const Challenge& c);

// n+1 independent N(mu, sigma^2) draws; sigma must be > 0.
ApufWeights sample_apuf_weights(int n, double mu, double sigma, Rng& rng);

// Inner product w . phi; lengths must match.
double delay_difference(const ApufWeights& w, const ParityVector& phi);

// Delay difference of weights w under challenge c without materialising phi.
double delay_difference(const ApufWeights& w, const Challenge& c);

// Response rule: 1 if the delay difference is negative, else 0.
Bit response_from_delay(double delta);

Bit respond(const ApufWeights& w, const Challenge& c);

// Response with fresh Gaussian weight noise drawn per call.
Bit respond_noisy(const ApufWeights& w, const Challenge& c, const NoiseSpec& noise, Rng& rng);

// Delay difference accumulated over stages 0..s only, with the truncated
// parity product ending at stage s. Used by feed-forward intermediate
// arbiters; s must satisfy 0 <= s < w.size() - 1 and s <= c.size().
double partial_delay_difference(const ApufWeights& w, const Challenge& c, int s);

// Adds fresh N(noise.mu, noise.sigma^2) perturbation to every entry.
ApufWeights perturb_weights(const ApufWeights& w, const NoiseSpec& noise, Rng& rng);

}  // namespace pufatt
