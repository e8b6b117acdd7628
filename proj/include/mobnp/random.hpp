#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mobnp {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/**
 * Random number source for every sampler in the library.
 *
 * A single 64-bit seed determines the whole stream. Independent child
 * streams (one per chain, replicate or stage) come from split(), which
 * hashes the parent seed with a stream index rather than consuming draws,
 * so adding a chain never perturbs the others.
 */
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    Rng split(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

    double uniform();                 // (0,1), never exactly 0
    double normal() { return std_normal_(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal(); }
    double gamma(double shape, double scale);
    double beta(double a, double b);
    double inverse_gamma(double shape, double scale) { return 1.0 / gamma(shape, 1.0 / scale); }
    std::vector<double> dirichlet(std::span<const double> concentration);
    int uniform_int(int n);           // {0, ..., n-1}
    bool bernoulli(double p) { return uniform() < p; }

    /// Index drawn with probability proportional to exp(log_weights[k]).
    int categorical_log(std::span<const double> log_weights);
    /// Index drawn with probability proportional to weights[k] >= 0.
    int categorical(std::span<const double> weights);

    /// N(mean, sd^2) restricted to (lower, inf).
    double truncated_normal_lower(double mean, double sd, double lower);

    std::mt19937_64& engine() { return engine_; }

  private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> std_normal_{0.0, 1.0};
};

/// log(sum(exp(x))) without overflow; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> x);

} // namespace mobnp
