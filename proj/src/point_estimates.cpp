#include "mobnp/point_estimates.hpp"

#include "mobnp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace mobnp {

namespace {

void check_samples(const std::vector<Allocation>& samples) {
    if (samples.empty())
        throw std::invalid_argument("co-clustering needs at least one sample");
    const std::size_t n = samples.front().size();
    for (const auto& s : samples)
        if (s.size() != n)
            throw StructuralError("co-clustering samples differ in length");
}

} // namespace

CoclusteringMatrix pairwise_coclustering(const std::vector<Allocation>& samples, ItemKind kind) {
    check_samples(samples);
    const auto n = static_cast<Eigen::Index>(samples.front().size());
    MatrixXd counts = MatrixXd::Zero(n, n);
    for (const auto& s : samples)
        for (Eigen::Index b = 0; b < n; ++b)
            for (Eigen::Index a = 0; a < b; ++a)
                if (s[a] == s[b])
                    counts(a, b) += 1.0;
    counts /= static_cast<double>(samples.size());
    MatrixXd probs = counts.triangularView<Eigen::StrictlyUpper>();
    probs += counts.transpose().triangularView<Eigen::StrictlyLower>();
    probs.diagonal().setOnes();
    return {std::move(probs), kind};
}

double coclustering_loss(const Allocation& alloc, const MatrixXd& pi_hat) {
    const auto n = static_cast<Eigen::Index>(alloc.size());
    if (pi_hat.rows() != n || pi_hat.cols() != n)
        throw StructuralError("coclustering_loss: matrix and allocation sizes differ");
    double loss = 0.0;
    for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index a = 0; a < b; ++a) {
            const double diff = (alloc[a] == alloc[b] ? 1.0 : 0.0) - pi_hat(a, b);
            loss += diff * diff;
        }
    return loss;
}

namespace {

// With pi = C / M the scaled loss M^2 * loss = sum_pairs C^2 + M * sum_{same pairs} (M - 2C) is an
// integer, so candidates compare exactly and ties are real ties.
struct ExactScore {
    std::int64_t constant = 0;            // sum over pairs of C^2
    std::vector<std::int64_t> same;       // per candidate, sum over its co-clustered pairs of (M - 2C)
};

LeastSquaresResult pick(const std::vector<Allocation>& samples, const ExactScore& score, std::int64_t M) {
    LeastSquaresResult best;
    std::int64_t best_score = std::numeric_limits<std::int64_t>::max();
    for (std::size_t m = 0; m < samples.size(); ++m)
        if (score.same[m] < best_score) {
            best_score = score.same[m];
            best.sample_index = m;
        }
    best.allocation = samples[best.sample_index];
    const double scaled = static_cast<double>(score.constant) + static_cast<double>(M) * static_cast<double>(best_score);
    best.loss = scaled / (static_cast<double>(M) * static_cast<double>(M));
    return best;
}

} // namespace

LeastSquaresResult least_squares_allocation(const std::vector<Allocation>& samples, const CoclusteringMatrix& pi_hat) {
    check_samples(samples);
    const auto n = static_cast<Eigen::Index>(samples.front().size());
    if (pi_hat.probs.rows() != n || pi_hat.probs.cols() != n)
        throw StructuralError("least_squares_allocation: matrix and allocation sizes differ");
    const auto M = static_cast<std::int64_t>(samples.size());
    // pi_hat built from these samples holds multiples of 1/M; anything else is scored in floating point.
    MatrixX<std::int64_t> C(n, n);
    bool integral = true;
    for (Eigen::Index b = 0; b < n && integral; ++b)
        for (Eigen::Index a = 0; a < b; ++a) {
            const double scaled = pi_hat.probs(a, b) * static_cast<double>(M);
            const double rounded = std::round(scaled);
            if (std::abs(scaled - rounded) > 1e-9 * static_cast<double>(M)) {
                integral = false;
                break;
            }
            C(a, b) = static_cast<std::int64_t>(rounded);
        }
    if (!integral) {
        LeastSquaresResult best;
        best.loss = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < samples.size(); ++m) {
            const double loss = coclustering_loss(samples[m], pi_hat.probs);
            if (loss < best.loss) {
                best.loss = loss;
                best.sample_index = m;
            }
        }
        best.allocation = samples[best.sample_index];
        return best;
    }
    ExactScore score;
    score.same.assign(samples.size(), 0);
    for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index a = 0; a < b; ++a)
            score.constant += C(a, b) * C(a, b);
    for (std::size_t m = 0; m < samples.size(); ++m) {
        const auto& s = samples[m];
        std::int64_t acc = 0;
        for (Eigen::Index b = 0; b < n; ++b)
            for (Eigen::Index a = 0; a < b; ++a)
                if (s[a] == s[b])
                    acc += M - 2 * C(a, b);
        score.same[m] = acc;
    }
    return pick(samples, score, M);
}

LeastSquaresResult least_squares_allocation(const std::vector<Allocation>& samples, std::size_t memory_budget_bytes) {
    check_samples(samples);
    const auto n = static_cast<Eigen::Index>(samples.front().size());
    const auto M = static_cast<std::int64_t>(samples.size());
    const std::size_t row_bytes = static_cast<std::size_t>(std::max<Eigen::Index>(n, 1)) * sizeof(std::int32_t);
    const auto block = static_cast<Eigen::Index>(
        std::clamp<std::size_t>(memory_budget_bytes / row_bytes, 1, static_cast<std::size_t>(std::max<Eigen::Index>(n, 1))));

    ExactScore score;
    score.same.assign(samples.size(), 0);
    MatrixX<std::int32_t> C(block, n);
    for (Eigen::Index start = 0; start < n; start += block) {
        const Eigen::Index rows = std::min(block, n - start);
        C.setZero();
        // Row r of the block counts co-clustering of item start + r with every later item.
        for (const auto& s : samples)
            for (Eigen::Index r = 0; r < rows; ++r) {
                const Eigen::Index a = start + r;
                for (Eigen::Index b = a + 1; b < n; ++b)
                    if (s[a] == s[b])
                        ++C(r, b);
            }
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index b = start + r + 1; b < n; ++b)
                score.constant += static_cast<std::int64_t>(C(r, b)) * C(r, b);
        for (std::size_t m = 0; m < samples.size(); ++m) {
            const auto& s = samples[m];
            std::int64_t acc = 0;
            for (Eigen::Index r = 0; r < rows; ++r) {
                const Eigen::Index a = start + r;
                for (Eigen::Index b = a + 1; b < n; ++b)
                    if (s[a] == s[b])
                        acc += M - 2 * static_cast<std::int64_t>(C(r, b));
            }
            score.same[m] += acc;
        }
    }
    return pick(samples, score, M);
}

} // namespace mobnp
