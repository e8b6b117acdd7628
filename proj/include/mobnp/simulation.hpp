#pragma once

#include "mobnp/core_model.hpp"
#include "mobnp/mcmc_engine.hpp"
#include "mobnp/random.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mobnp {

/// Generator settings; defaults give two 70 x 250 platforms with three row clusters.
struct SimulationConfig {
    int n = 70;
    std::vector<int> p = {250, 250};
    std::vector<double> discount = {0.2, 0.25};
    double alpha1 = 10.0;
    double alpha3 = 10.0;
    double alpha4 = 10.0;
    double mu0 = 0.0;
    double tau0 = 1.0;
    double sigma = 0.2;
    int h = 3;                   // equiprobable true row clusters
    int truncation = 2000;

    int num_platforms() const { return static_cast<int>(p.size()); }
    void validate() const;
};

struct SyntheticTruth {
    Allocation row_alloc;
    std::vector<Allocation> column_alloc;
    std::vector<MatrixXd> phi;   // H x K_t in canonical row labels (empty categories dropped)
    double sigma = 0.0;
    SimulationConfig config;
};

struct SyntheticData {
    TransformedDataset data;
    SyntheticTruth truth;
};

/**
 * Draws a dataset with known truth. Row labels come from an equiprobable
 * h-category multinomial, probe labels from PDP(d_t, alpha1) partitions,
 * and latent values iid from G_1t ~ DP(alpha3, G_0), G_0 ~ DP(alpha4,
 * N(mu0, tau0^2)), both by truncated stick-breaking. The noise draws do not
 * depend on sigma, so two configs differing only in sigma share everything
 * but the noise scale under one seed.
 */
SyntheticData generate_synthetic(const SimulationConfig& config, Rng& rng);

/// Fraction of unordered pairs on which the two allocations agree about co-membership.
double pair_agreement(const Allocation& a, const Allocation& b);
double column_accuracy(const Allocation& estimate, const Allocation& truth);
double row_accuracy(const Allocation& estimate, const Allocation& truth);

struct R2Result {
    double pooled = 0.0;
    std::vector<double> per_platform;   // NaN where the platform has zero total variation
};

/// 1 - SSE/SST with SST about each platform's grand mean.
R2Result fit_r2(const TransformedDataset& data, const ClusterState& state, const LatentMatrices& latents);

struct SurvivalConfig {
    int num_predictors = 20;
    double max_abs_correlation = 0.3;   // between chosen predictors
    double effect = 0.5;                // |coefficient| on standardized probes
    double censor_fraction = 0.2;
    int platform = 0;
};

struct SurvivalTruth {
    ClinicalOutcomes outcomes;
    std::vector<int> predictors;        // probe indices in the chosen platform
    VectorXd coefficients;
};

/// Exponential survival times driven by weakly correlated probes; a random
/// censor_fraction of subjects is censored uniformly before their event.
SurvivalTruth generate_survival(const TransformedDataset& data, const SurvivalConfig& config, Rng& rng);

struct ReplicationConfig {
    SimulationConfig base;
    SamplerConfig sampler;
    std::vector<int> h_values = {3, 4, 5};
    std::vector<double> sigma_values = {0.2, 0.3, 0.4, 0.5};
    int replicates = 10;
    int threads = 1;
};

/// Sampler settings matching the generator's masses (alpha1, alpha3, alpha4, mu0, tau0).
SamplerConfig sampler_for_simulation(const SimulationConfig& sim, SamplerConfig base = {});

struct ReplicateResult {
    int setup_h = 0;
    double setup_sigma = 0.0;
    int replicate = 0;
    std::vector<double> kappa;
    double theta = 0.0;
    std::vector<double> r2;
    double seconds = 0.0;
    std::optional<std::string> error;
};

/// One generate-and-fit replicate. Data depend on (seed, h, replicate) only.
ReplicateResult run_replicate(const ReplicationConfig& config, int h, double sigma, int replicate,
                              std::uint64_t seed);

/// Every (h, sigma) cell times every replicate, in grid order; failures are recorded, not thrown.
std::vector<ReplicateResult> run_replication_study(const ReplicationConfig& config, std::uint64_t seed);

/// Long-format CSV: setup_h, setup_sigma, replicate, kappa_1.., theta, r2_1.., seconds.
void write_replication_csv(std::ostream& out, const std::vector<ReplicateResult>& results, bool with_seconds = true);

struct SetupSummary {
    int setup_h = 0;
    double setup_sigma = 0.0;
    int count = 0;
    std::vector<double> kappa_mean, kappa_sd;
    double theta_mean = 0.0, theta_sd = 0.0;
    std::vector<double> r2_mean, r2_sd;
};

std::vector<SetupSummary> summarize(const std::vector<ReplicateResult>& results);
void write_summary_csv(std::ostream& out, const std::vector<SetupSummary>& summary);

} // namespace mobnp
