#pragma once

#include "mobnp/types.hpp"

namespace mobnp {

/// 1 - Pearson correlation between columns. Two constant columns are at
/// distance 0; a constant and a varying column at distance 1.
MatrixXd correlation_distance(const MatrixXd& values);

/// Complete-linkage agglomerative clustering of a symmetric distance matrix,
/// cut at `height`: items end up together iff they merge at or below it.
/// Runs the nearest-neighbour-chain algorithm in O(p^2) time.
Allocation complete_linkage_cut(const MatrixXd& distance, double height);

} // namespace mobnp
