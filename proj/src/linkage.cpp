#include "mobnp/linkage.hpp"

#include "mobnp/errors.hpp"
#include "mobnp/partition_priors.hpp"

#include <limits>
#include <numeric>
#include <vector>

namespace mobnp {

MatrixXd correlation_distance(const MatrixXd& values) {
    const Eigen::Index p = values.cols();
    MatrixXd centered = values.rowwise() - values.colwise().mean();
    VectorXd norms = centered.colwise().norm().transpose();
    std::vector<bool> constant(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        constant[j] = !(norms(j) > 1e-12 * std::max(1.0, values.col(j).cwiseAbs().maxCoeff()));
        if (constant[j])
            centered.col(j).setZero();
        else
            centered.col(j) /= norms(j);
    }
    MatrixXd dist = MatrixXd::Ones(p, p) - centered.transpose() * centered;
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b) {
            if (constant[a] || constant[b])
                dist(a, b) = (constant[a] && constant[b]) ? 0.0 : 1.0;
            dist(a, b) = std::max(0.0, dist(a, b));
        }
    dist.diagonal().setZero();
    return dist;
}

namespace {

struct DisjointSets {
    std::vector<int> parent;
    explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

} // namespace

Allocation complete_linkage_cut(const MatrixXd& distance, double height) {
    const auto p = static_cast<int>(distance.rows());
    if (distance.cols() != p)
        throw StructuralError("complete_linkage_cut: distance matrix must be square");
    if (p == 0)
        return {};
    // Working copy; row/column of a cluster representative hold cluster distances.
    MatrixXd d = distance;
    std::vector<bool> active(p, true);
    std::vector<int> chain;
    chain.reserve(p);
    DisjointSets sets(p);
    int remaining = p;
    while (remaining > 1) {
        if (chain.empty()) {
            for (int i = 0; i < p; ++i)
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
        }
        const int a = chain.back();
        const int prev = chain.size() > 1 ? chain[chain.size() - 2] : -1;
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < p; ++j) {
            if (!active[j] || j == a)
                continue;
            // Prefer the previous chain element on ties so the chain terminates.
            if (d(a, j) < best_d || (d(a, j) == best_d && j == prev)) {
                best_d = d(a, j);
                best = j;
            }
        }
        if (best == prev) {
            chain.pop_back();
            chain.pop_back();
            // Merge best into a: complete linkage takes the max distance.
            for (int j = 0; j < p; ++j)
                if (active[j] && j != a && j != best) {
                    const double m = std::max(d(a, j), d(best, j));
                    d(a, j) = m;
                    d(j, a) = m;
                }
            active[best] = false;
            --remaining;
            if (best_d <= height)
                sets.unite(best, a);
        } else {
            chain.push_back(best);
        }
    }
    Allocation raw(p);
    for (int i = 0; i < p; ++i)
        raw[i] = sets.find(i);
    return canonicalize(raw);
}

} // namespace mobnp
