#include "mobnp/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mobnp {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    // 53 random bits mapped to the open interval (0,1).
    const auto bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
        throw std::invalid_argument("gamma: shape and scale must be positive");
    return std::gamma_distribution<double>(shape, scale)(engine_);
}

double Rng::beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
}

std::vector<double> Rng::dirichlet(std::span<const double> concentration) {
    std::vector<double> out(concentration.size());
    double total = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = gamma(concentration[k], 1.0);
        total += out[k];
    }
    for (auto& v : out)
        v /= total;
    return out;
}

int Rng::uniform_int(int n) {
    if (n <= 0)
        throw std::invalid_argument("uniform_int: n must be positive");
    return std::min(n - 1, static_cast<int>(uniform() * n));
}

int Rng::categorical_log(std::span<const double> log_weights) {
    if (log_weights.empty())
        throw std::invalid_argument("categorical_log: empty weight vector");
    const double top = *std::max_element(log_weights.begin(), log_weights.end());
    if (!std::isfinite(top))
        throw std::domain_error("categorical_log: no finite weight");
    thread_local std::vector<double> w;
    w.resize(log_weights.size());
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = std::exp(log_weights[k] - top);
        total += w[k];
    }
    double u = uniform() * total;
    for (std::size_t k = 0; k < w.size(); ++k) {
        u -= w[k];
        if (u <= 0.0)
            return static_cast<int>(k);
    }
    // Rounding left a sliver; return the last positive-weight entry.
    for (std::size_t k = log_weights.size(); k-- > 0;)
        if (std::isfinite(log_weights[k]))
            return static_cast<int>(k);
    return 0;
}

int Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights)
        total += w;
    if (!(total > 0.0))
        throw std::domain_error("categorical: weights sum to zero");
    double u = uniform() * total;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        u -= weights[k];
        if (u <= 0.0)
            return static_cast<int>(k);
    }
    for (std::size_t k = weights.size(); k-- > 0;)
        if (weights[k] > 0.0)
            return static_cast<int>(k);
    return 0;
}

double Rng::truncated_normal_lower(double mean, double sd, double lower) {
    const double a = (lower - mean) / sd;
    double x;
    if (a < 0.45) {
        // Acceptance probability of plain rejection is at least 1/3 here.
        do {
            x = normal();
        } while (x <= a);
    } else {
        // Robert (1995) translated-exponential proposal.
        const double lambda = 0.5 * (a + std::sqrt(a * a + 4.0));
        for (;;) {
            x = a - std::log(uniform()) / lambda;
            const double diff = x - lambda;
            if (uniform() <= std::exp(-0.5 * diff * diff))
                break;
        }
    }
    return mean + sd * x;
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty())
        return -std::numeric_limits<double>::infinity();
    const double top = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(top))
        return top;
    double total = 0.0;
    for (double v : x)
        total += std::exp(v - top);
    return top + std::log(total);
}

} // namespace mobnp
