#pragma once

#include "mobnp/core_model.hpp"
#include "mobnp/random.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mobnp {

struct ProbeRef {
    int platform = 0;
    int probe = 0;

    bool operator==(const ProbeRef&) const = default;
};

/// Column clusters of all platforms after merging those with identical atom columns.
struct MergedClusters {
    int K = 0;
    std::vector<std::vector<ProbeRef>> members;
    std::vector<int> sizes;
    /// Global-atom-id column shared by every platform cluster merged into k.
    std::vector<std::vector<int>> source;
    /// merged_of[t][k]: merged index of platform t's column cluster k.
    std::vector<std::vector<int>> merged_of;
};

/// Two platform column clusters merge iff their latent columns reference the same atom-id sequence.
MergedClusters merge_clusters(const LatentMatrices& latents, const ClusterState& state);

/// Role of a merged cluster in the outcome regression; gamma_r = 1 for exactly one r.
enum class Role : int { excluded = 0, linear = 1, nonlinear = 2 };

struct IndicatorTriplet {
    std::vector<Role> role;

    int K() const { return static_cast<int>(role.size()); }
    int gamma(int r, int k) const { return static_cast<int>(role[k]) == r ? 1 : 0; }
    /// (k0, k1, k2)
    std::array<int, 3> counts() const;
};

/// Truncated power basis: order s, v interior knots at empirical quantiles l/(v+1).
struct SplineConfig {
    int order = 1;
    int knots = 1;

    int columns() const { return order + knots; }
    void validate() const;
};

/// Sample quantile with linear interpolation between order statistics.
double empirical_quantile(std::vector<double> x, double prob);

/// Basis columns mu, ..., mu^s, (mu - kappa_1)_+^s, ..., (mu - kappa_v)_+^s.
MatrixXd spline_basis(const VectorXd& mu, const SplineConfig& spline);

/// Number of design columns: 1 + k1 + k2 (v + s).
int design_columns(const IndicatorTriplet& triplets, const SplineConfig& spline);

/**
 * Active design U_gamma: an intercept, then for every cluster in index
 * order either its representative values (linear) or their spline basis
 * (nonlinear). `representatives` is n x K, column k holding mu_.k.
 * Throws ConstraintViolation when col(U_gamma) >= n.
 */
MatrixXd build_design(const IndicatorTriplet& triplets, const MatrixXd& representatives, const SplineConfig& spline);

struct ConstraintViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Zellner prior beta ~ N(0, g tau2 (U'U)^{-1}); g <= 0 means g = n.
struct GPrior {
    double g = 0.0;
    double value(int n) const { return g > 0.0 ? g : static_cast<double>(n); }
};

/// log p(y | U, tau2) with beta integrated out under the g-prior.
double g_prior_log_marginal(const MatrixXd& U, const VectorXd& y, double tau2, double g);

/// y_i for censored subjects drawn from N(eta_i, tau2) truncated to (log w_i, inf); events keep log w_i.
VectorXd augment_censored(const VectorXd& y, const ClinicalOutcomes& outcomes, const VectorXd& eta, double tau2,
                          Rng& rng);

struct SelectionState {
    IndicatorTriplet triplets;
    std::array<double, 3> omega = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    std::vector<int> representatives;   // index into MergedClusters::members[k]
    VectorXd beta;                      // length col(U_gamma)
    double tau2 = 1.0;
    VectorXd y;
    SplineConfig spline;
    int jitter_events = 0;              // times a ridge of 1e-8 had to be added to U'U

    void validate(int n) const;
};

struct SelectionConfig {
    int sweeps = 2000;
    double burn_in_fraction = 0.5;
    int thin = 1;
    GPrior g_prior;
    InverseGammaPrior tau_prior;
    SplineConfig spline;
    double fdr_alpha = 0.2;

    void validate() const;
};

/// Inputs held fixed through Stage 2.
struct SelectionProblem {
    const TransformedDataset* data = nullptr;
    MergedClusters clusters;
    ClinicalOutcomes outcomes;

    int n() const { return outcomes.n(); }
    int K() const { return clusters.K; }
    /// Data column of member m of cluster k.
    VectorXd member_values(int k, int m) const;
    /// n x K matrix of the current representatives' values.
    MatrixXd representative_matrix(const std::vector<int>& representatives) const;
};

SelectionState initial_selection_state(const SelectionProblem& problem, const SelectionConfig& config, Rng& rng);

/// Resamples cluster k's representative from its full conditional given beta, tau2 and y.
int elect_representative(const SelectionProblem& problem, const SelectionState& state, const SelectionConfig& config,
                         int k, Rng& rng);

/**
 * One sweep: each gamma_k (three-way, beta integrated out), omega, beta,
 * tau2, every representative, then the censored log-times.
 */
void selection_sweep(const SelectionProblem& problem, SelectionState& state, const SelectionConfig& config, Rng& rng);

struct SelectionSample {
    std::vector<Role> roles;
    std::vector<int> representatives;
    double tau2 = 0.0;
};

/// Fraction of samples with gamma_1k + gamma_2k = 1.
std::vector<double> inclusion_probs(const std::vector<SelectionSample>& trace);

struct FdrSelection {
    std::vector<int> selected;     // ascending cluster indices
    std::optional<double> cutoff;  // psi_alpha; empty when nothing qualifies
};

/// Largest l with sum_{k<=l} (1 - b_(k)) <= alpha over descending b; keeps b_k >= b_(l).
FdrSelection fdr_select(const std::vector<double>& b_hat, double alpha);

struct SelectionResult {
    std::vector<SelectionSample> trace;
    std::vector<double> b_hat;
    FdrSelection selection;
    /// Per cluster and member, fraction of samples electing that member.
    std::vector<std::vector<double>> representative_freq;
    /// Per cluster, fraction of samples in each role.
    std::vector<std::array<double, 3>> role_freq;
    int jitter_events = 0;
};

SelectionResult run_selection(const SelectionProblem& problem, const SelectionConfig& config, Rng& rng);

/// cluster_id, size, members, b_hat, selected, role frequencies, representative frequencies.
void write_selection_report(std::ostream& out, const SelectionProblem& problem, const SelectionResult& result);

} // namespace mobnp
