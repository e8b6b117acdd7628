#pragma once

#include "mobnp/errors.hpp"
#include "mobnp/types.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace mobnp {

enum class Transform { identity, logit };

Transform parse_transform(const std::string& name);
std::string to_string(Transform kind);

/// One omics platform after its transform: n patients (rows) by p_t probes.
struct PlatformMatrix {
    int platform_id = 0;
    MatrixXd values;
    std::vector<std::string> probe_names;
    std::vector<std::string> patient_ids;
    Transform transform = Transform::identity;

    int n() const { return static_cast<int>(values.rows()); }
    int p() const { return static_cast<int>(values.cols()); }
};

/// Survival outcomes aligned with the platform row order.
struct ClinicalOutcomes {
    VectorXd observed_time;   // w_i > 0
    std::vector<int> event;   // 1 = event observed, 0 = censored
    VectorXd log_time;        // y_i; equals log(w_i) for events, >= log(w_i) when censored

    int n() const { return static_cast<int>(observed_time.size()); }
    static ClinicalOutcomes from_times(const VectorXd& time, std::vector<int> event);
    void validate() const;
};

struct TransformedDataset {
    std::vector<PlatformMatrix> platforms;
    std::optional<ClinicalOutcomes> clinical;

    int n() const { return platforms.empty() ? 0 : platforms.front().n(); }
    int num_platforms() const { return static_cast<int>(platforms.size()); }
    /// Shapes, finiteness and patient-id agreement across platforms.
    void validate() const;
};

/// Bidirectional allocations: per-platform probe clusters and global row clusters.
struct ClusterState {
    std::vector<Allocation> column_alloc;
    Allocation row_alloc;

    int num_platforms() const { return static_cast<int>(column_alloc.size()); }
    int K(int t) const;
    int H() const;
    /// Canonical contiguous labels with no empty cluster.
    void validate() const;
};

/// Per-platform H x K_t latent matrices with the global atom behind every cell.
struct LatentMatrices {
    std::vector<MatrixXd> phi;
    std::vector<MatrixXi> atom_ids;
    VectorXd sigma;           // length T; all entries equal unless per-platform noise is enabled

    int num_platforms() const { return static_cast<int>(phi.size()); }
};

struct InverseGammaPrior {
    double shape = 0.01;
    double scale = 0.01;
};

struct Hyperparameters {
    double alpha1 = 1.0;      // PDP mass, shared by all platforms' column partitions
    double alpha2 = 1.0;      // DP mass of the global row partition
    double alpha3 = 1.0;      // mass of G_t ~ DP(alpha3, G_0)
    double alpha4 = 1.0;      // mass of G_0 ~ DP(alpha4, N(mu0, tau0^2))
    double mu0 = 0.0;
    double tau0 = 1.0;
    std::vector<double> discount;     // starting d_t; resized to T when empty
    bool sample_discount = true;      // prior 1/2 delta_0 + 1/2 U(0,1)
    InverseGammaPrior sigma_prior;

    void validate() const;
};

// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar logit(Scalar x) {
    return std::log(x / (Scalar(1) - x));
}

template <typename Scalar>
Scalar inverse_logit(Scalar z) {
    return Scalar(1) / (Scalar(1) + std::exp(-z));
}

/// Elementwise platform transform. Logit requires every cell strictly inside (0,1).
template <typename Derived>
MatrixX<typename Derived::Scalar> transform_platform(const Eigen::MatrixBase<Derived>& raw, Transform kind) {
    using Scalar = typename Derived::Scalar;
    MatrixX<Scalar> out = raw;
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i) {
            const Scalar x = out(i, j);
            if (!std::isfinite(x))
                throw DomainError("transform_platform: non-finite value at row " + std::to_string(i + 1) +
                                  ", column " + std::to_string(j + 1));
            if (kind == Transform::logit) {
                if (!(x > Scalar(0) && x < Scalar(1)))
                    throw DomainError("transform_platform: logit needs values in (0,1); row " +
                                      std::to_string(i + 1) + ", column " + std::to_string(j + 1) +
                                      " holds " + std::to_string(x));
                out(i, j) = logit(x);
            }
        }
    return out;
}

/// Proportions clipped into [eps, 1 - eps] ahead of a logit transform.
template <typename Derived>
MatrixX<typename Derived::Scalar> clip_proportions(const Eigen::MatrixBase<Derived>& raw,
                                                   typename Derived::Scalar eps) {
    using Scalar = typename Derived::Scalar;
    return raw.cwiseMax(eps).cwiseMin(Scalar(1) - eps);
}

/// Normal(phi, sigma^2) log density at z.
template <typename Scalar>
Scalar cell_log_likelihood(Scalar z, Scalar phi, Scalar sigma) {
    if (!std::isfinite(z) || !std::isfinite(phi) || !std::isfinite(sigma))
        throw std::invalid_argument("cell_log_likelihood: non-finite input");
    if (!(sigma > Scalar(0)))
        throw std::invalid_argument("cell_log_likelihood: sigma must be positive");
    const Scalar r = (z - phi) / sigma;
    return -Scalar(0.5) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>) - std::log(sigma) - Scalar(0.5) * r * r;
}

/// Sum of cell log-likelihoods over every (i, j, t) with phi = Phi_t(r_i, c_jt).
double dataset_log_likelihood(const TransformedDataset& data, const ClusterState& state,
                              const LatentMatrices& latents);

/// Checks that state and latents agree with the data dimensions.
void check_dimensions(const TransformedDataset& data, const ClusterState& state, const LatentMatrices& latents);

} // namespace mobnp
