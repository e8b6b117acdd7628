#pragma once

#include "mobnp/types.hpp"

#include <cstddef>
#include <vector>

namespace mobnp {

enum class ItemKind { probe, subject };

/// Posterior pairwise co-clustering probabilities; symmetric with unit diagonal.
struct CoclusteringMatrix {
    MatrixXd probs;
    ItemKind item_kind = ItemKind::probe;
};

/// Fraction of samples placing each pair of items in the same cluster.
CoclusteringMatrix pairwise_coclustering(const std::vector<Allocation>& samples, ItemKind kind = ItemKind::probe);

/// Sum over pairs a < b of (1[alloc_a == alloc_b] - pi_ab)^2.
double coclustering_loss(const Allocation& alloc, const MatrixXd& pi_hat);

struct LeastSquaresResult {
    Allocation allocation;
    std::size_t sample_index = 0;
    double loss = 0.0;
};

/// Sample minimising the squared distance to pi_hat; ties go to the earliest sample.
LeastSquaresResult least_squares_allocation(const std::vector<Allocation>& samples, const CoclusteringMatrix& pi_hat);

/**
 * Same estimator without materialising the full co-clustering matrix.
 *
 * Rows of pi_hat are built in blocks sized to memory_budget_bytes and the
 * loss of every candidate is accumulated block by block, so very wide
 * platforms run in bounded memory. Losses agree with the two-step version
 * up to summation order.
 */
LeastSquaresResult least_squares_allocation(const std::vector<Allocation>& samples,
                                            std::size_t memory_budget_bytes = std::size_t{1} << 30);

} // namespace mobnp
