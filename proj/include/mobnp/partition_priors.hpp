#pragma once

#include "mobnp/random.hpp"
#include "mobnp/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace mobnp {

/// Cluster sizes of a partition; total is their sum.
struct PartitionCounts {
    std::vector<int> sizes;
    int total = 0;

    PartitionCounts() = default;
    explicit PartitionCounts(std::vector<int> s);
    static PartitionCounts of(const Allocation& alloc);
    int K() const { return static_cast<int>(sizes.size()); }
};

/// A discrete probability measure sum_l weights[l] * delta(atoms[l]).
struct DiscreteMeasure {
    std::vector<double> atoms;
    std::vector<double> weights;

    double sample(Rng& rng) const { return atoms[rng.categorical(weights)]; }
};

/**
 * Poisson-Dirichlet (Pitman-Yor) predictive rule.
 *
 * Returns K+1 probabilities: entry k < K is proportional to sizes[k] - d,
 * entry K (a new cluster) to alpha + K d. With d = 0 this is the Chinese
 * restaurant rule of a Dirichlet process.
 */
std::vector<double> pdp_predictive(const PartitionCounts& counts, double d, double alpha);

/// Sequential draw of a p-item partition; labels canonical, first item in cluster 0.
Allocation sample_partition(int p, double d, double alpha, Rng& rng);

/// Log prior probability of a canonically labelled allocation (product of predictive steps).
double partition_log_prob(const Allocation& alloc, double d, double alpha);

/// Closed-form EPPF from cluster sizes; equal to partition_log_prob for any ordering.
double pdp_log_eppf(std::span<const int> sizes, double d, double alpha);

/// Truncated stick-breaking draw from DP(alpha, base); the last stick takes the remainder.
DiscreteMeasure stick_breaking(double alpha, const std::function<double(Rng&)>& base_sampler, int truncation,
                               Rng& rng);

/// Draw from the discount prior 1/2 delta_0 + 1/2 U(0,1).
double sample_discount(Rng& rng);

bool is_canonical(const Allocation& alloc);
/// Relabels clusters in order of first appearance.
Allocation canonicalize(const Allocation& alloc);
int num_clusters(const Allocation& alloc);
std::vector<int> cluster_sizes(const Allocation& alloc);

/// Every set partition of n items as canonical restricted-growth strings.
std::vector<Allocation> enumerate_partitions(int n);

} // namespace mobnp
