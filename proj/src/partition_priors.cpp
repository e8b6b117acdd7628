#include "mobnp/partition_priors.hpp"

#include "mobnp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace mobnp {

namespace {

void check_pdp(double d, double alpha) {
    if (!(d >= 0.0 && d < 1.0))
        throw std::invalid_argument("PDP discount must lie in [0,1)");
    if (!(alpha > -d))
        throw std::invalid_argument("PDP mass must exceed -discount");
}

} // namespace

PartitionCounts::PartitionCounts(std::vector<int> s) : sizes(std::move(s)) {
    for (int v : sizes)
        if (v < 1)
            throw std::invalid_argument("PartitionCounts: cluster sizes must be positive");
    total = std::accumulate(sizes.begin(), sizes.end(), 0);
}

PartitionCounts PartitionCounts::of(const Allocation& alloc) { return PartitionCounts(cluster_sizes(alloc)); }

std::vector<double> pdp_predictive(const PartitionCounts& counts, double d, double alpha) {
    check_pdp(d, alpha);
    const int K = counts.K();
    if (!(alpha + K * d > 0.0))
        throw std::invalid_argument("pdp_predictive: alpha + K d must be positive");
    std::vector<double> prob(K + 1);
    const double denom = alpha + counts.total;
    for (int k = 0; k < K; ++k)
        prob[k] = (counts.sizes[k] - d) / denom;
    prob[K] = (alpha + K * d) / denom;
    return prob;
}

Allocation sample_partition(int p, double d, double alpha, Rng& rng) {
    check_pdp(d, alpha);
    if (p < 1)
        throw std::invalid_argument("sample_partition: p must be positive");
    Allocation alloc(p);
    std::vector<double> weights;
    std::vector<int> sizes;
    for (int j = 0; j < p; ++j) {
        const int K = static_cast<int>(sizes.size());
        weights.resize(K + 1);
        for (int k = 0; k < K; ++k)
            weights[k] = sizes[k] - d;
        weights[K] = alpha + K * d;
        const int k = (j == 0) ? 0 : rng.categorical(weights);
        if (k == K)
            sizes.push_back(0);
        ++sizes[k];
        alloc[j] = k;
    }
    return alloc;
}

double partition_log_prob(const Allocation& alloc, double d, double alpha) {
    check_pdp(d, alpha);
    if (!is_canonical(alloc))
        throw StructuralError("partition_log_prob: allocation is not canonically labelled");
    std::vector<int> sizes;
    double lp = 0.0;
    for (std::size_t j = 0; j < alloc.size(); ++j) {
        const int K = static_cast<int>(sizes.size());
        const int k = alloc[j];
        const double denom = alpha + static_cast<double>(j);
        if (j > 0)
            lp += (k == K) ? std::log((alpha + K * d) / denom) : std::log((sizes[k] - d) / denom);
        if (k == K)
            sizes.push_back(0);
        ++sizes[k];
    }
    return lp;
}

double pdp_log_eppf(std::span<const int> sizes, double d, double alpha) {
    check_pdp(d, alpha);
    const int K = static_cast<int>(sizes.size());
    if (K == 0)
        return 0.0;
    const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
    double lp = 0.0;
    for (int i = 1; i < K; ++i)
        lp += std::log(alpha + i * d);
    // rising factorial (alpha+1)_(total-1)
    lp -= std::lgamma(alpha + total) - std::lgamma(alpha + 1.0);
    for (int s : sizes)
        lp += std::lgamma(s - d) - std::lgamma(1.0 - d);
    return lp;
}

DiscreteMeasure stick_breaking(double alpha, const std::function<double(Rng&)>& base_sampler, int truncation,
                               Rng& rng) {
    if (truncation < 1)
        throw std::invalid_argument("stick_breaking: truncation must be at least 1");
    if (!(alpha > 0.0))
        throw std::invalid_argument("stick_breaking: alpha must be positive");
    DiscreteMeasure out;
    out.atoms.reserve(truncation);
    out.weights.reserve(truncation);
    double remaining = 1.0;
    for (int l = 0; l < truncation; ++l) {
        double w = remaining;
        if (l + 1 < truncation) {
            // Beta(1, alpha) by inversion.
            const double v = -std::expm1(std::log(rng.uniform()) / alpha);
            w = v * remaining;
            remaining -= w;
        }
        out.weights.push_back(w);
        out.atoms.push_back(base_sampler(rng));
    }
    return out;
}

double sample_discount(Rng& rng) { return rng.bernoulli(0.5) ? 0.0 : rng.uniform(); }

bool is_canonical(const Allocation& alloc) {
    int next = 0;
    for (int v : alloc) {
        if (v < 0 || v > next)
            return false;
        if (v == next)
            ++next;
    }
    return true;
}

Allocation canonicalize(const Allocation& alloc) {
    std::unordered_map<int, int> relabel;
    Allocation out(alloc.size());
    for (std::size_t i = 0; i < alloc.size(); ++i) {
        auto [it, inserted] = relabel.try_emplace(alloc[i], static_cast<int>(relabel.size()));
        out[i] = it->second;
    }
    return out;
}

int num_clusters(const Allocation& alloc) {
    int top = -1;
    for (int v : alloc)
        top = std::max(top, v);
    return top + 1;
}

std::vector<int> cluster_sizes(const Allocation& alloc) {
    std::vector<int> sizes(num_clusters(alloc), 0);
    for (int v : alloc) {
        if (v < 0)
            throw StructuralError("cluster_sizes: negative label");
        ++sizes[v];
    }
    for (int s : sizes)
        if (s == 0)
            throw StructuralError("cluster_sizes: empty cluster label");
    return sizes;
}

std::vector<Allocation> enumerate_partitions(int n) {
    std::vector<Allocation> out;
    if (n <= 0)
        return out;
    Allocation a(n, 0);
    std::vector<int> prefix_max(n, 0);  // max label among a[0..i]
    for (;;) {
        out.push_back(a);
        int i = n - 1;
        while (i > 0 && a[i] == prefix_max[i - 1] + 1)
            --i;
        if (i == 0)
            break;
        ++a[i];
        prefix_max[i] = std::max(prefix_max[i - 1], a[i]);
        for (int j = i + 1; j < n; ++j) {
            a[j] = 0;
            prefix_max[j] = prefix_max[i];
        }
    }
    return out;
}

} // namespace mobnp
