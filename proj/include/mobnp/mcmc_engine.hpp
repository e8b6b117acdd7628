#pragma once

#include "mobnp/atom_store.hpp"
#include "mobnp/core_model.hpp"
#include "mobnp/partition_priors.hpp"
#include "mobnp/random.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mobnp {

enum class Stage { s1a, s1b, s1c, s2 };
std::string to_string(Stage stage);

struct ChainSchedule {
    int sweeps_1a = 2000;
    int sweeps_1b = 1000;
    int sweeps_1c = 1000;
    double burn_in_fraction = 0.5;
    int thin = 2;

    int burn_in(int sweeps) const { return static_cast<int>(burn_in_fraction * sweeps); }
    void validate() const;
};

struct DiscountProposal {
    double random_walk_sd = 0.05;
    double jump_to_zero_prob = 0.5;   // chance of proposing d -> 0 from d > 0
    int moves_per_sweep = 1;
};

struct SamplerConfig {
    Hyperparameters hyper;
    ChainSchedule schedule;
    DiscountProposal discount_proposal;
    double init_cut_height = 0.5;
    bool per_platform_sigma = false;
    /// Re-verifies every bookkeeping invariant after each kernel (slow; small instances).
    bool debug_checks = false;
    /// When set, every G_t is this known measure instead of the atom hierarchy.
    std::optional<DiscreteMeasure> fixed_measure;
};

/// Complete sampler state: allocations, atom hierarchy, noise and discounts.
struct ModelState {
    ClusterState clusters;
    AtomStore store;
    VectorXd sigma;
    std::vector<double> discount;

    LatentMatrices latents() const;
};

/**
 * Starting point from a naive per-platform analysis: probes grouped by
 * complete-linkage clustering on correlation distance (cut at
 * config.init_cut_height), all patients in one row cluster, every latent
 * cell at the mean of its data and one global atom per distinct value.
 */
ModelState init_state(const TransformedDataset& data, const SamplerConfig& config);

/// State with the given allocations and latent cells seated sequentially given the data.
ModelState seat_state(const TransformedDataset& data, const SamplerConfig& config, ClusterState clusters,
                      VectorXd sigma, std::vector<double> discount, Rng& rng);

/// Shape / scale of the inverse-gamma full conditional of sigma^2.
InverseGammaPrior sigma_full_conditional(double residual_ss, double residual_count, const InverseGammaPrior& prior);

struct DiscountMove {
    double value;
    bool accepted;
};

/**
 * One Metropolis-Hastings move on a PDP discount under 1/2 delta_0 + 1/2 U(0,1),
 * targeting the exchangeable partition probability of `sizes`. From 0 the
 * move proposes a U(0,1) value; from d > 0 it proposes 0 with probability
 * jump_to_zero_prob and otherwise a reflected Gaussian random walk.
 */
DiscountMove discount_mh_step(double d, std::span<const int> sizes, double alpha, const DiscountProposal& proposal,
                              Rng& rng);

struct DiagnosticRow {
    Stage stage = Stage::s1a;
    int sweep = 0;
    std::vector<int> K;
    int H = 0;
    VectorXd sigma;
    std::vector<double> discount;
    int live_atoms = 0;
    double log_posterior = 0.0;
};

struct TraceSample {
    std::vector<Allocation> columns;
    Allocation rows;
    std::vector<MatrixXd> phi;
    std::vector<MatrixXi> atom_ids;
    VectorXd sigma;
    std::vector<double> discount;

    bool operator==(const TraceSample&) const = default;
};

struct ChainTrace {
    Stage stage = Stage::s1a;
    int sweeps = 0;
    int burn_in = 0;
    int thin = 1;
    std::uint64_t seed = 0;
    std::vector<TraceSample> samples;
    std::vector<DiagnosticRow> diagnostics;
    std::vector<double> discount_acceptance;   // per platform, over all sweeps

    bool records(int sweep) const { return sweep >= burn_in && (sweep - burn_in) % thin == 0; }
};

/**
 * Gibbs sampler for bidirectional clustering under the PDP / DP / atom
 * hierarchy model.
 *
 * Column and row moves are single-site updates. A site may open a new
 * cluster; the data of that site are then scored against the current
 * predictive of each new latent cell (atoms of the hierarchy plus a fresh
 * N(mu0, tau0^2) atom) with the cell value integrated out, and the new
 * cells are seated from their posterior. Emptied clusters are dropped and
 * labels recanonicalised at the end of each sweep.
 */
class BiclusterSampler {
  public:
    BiclusterSampler(const TransformedDataset& data, SamplerConfig config, ModelState state);

    void update_column_allocations(int t, Rng& rng);
    void update_row_allocations(Rng& rng);
    void update_latent_atoms(Rng& rng);
    void update_sigma(Rng& rng);
    /// Returns whether the proposal was accepted.
    bool update_discount(int t, Rng& rng);

    const ModelState& state() const { return state_; }
    ClusterState clusters() const { return state_.clusters; }
    LatentMatrices latents() const { return state_.latents(); }
    const AtomStore& store() const { return state_.store; }

    /// Sufficient statistics of every latent cell, indexed [t][k][h].
    const std::vector<std::vector<std::vector<CellStats>>>& cell_stats() const;
    /// Data log-likelihood evaluated from the cell statistics.
    double log_likelihood_from_stats() const;
    /// Unnormalised log posterior of the full augmented state.
    double log_posterior() const;
    void check_invariants() const;

  private:
    void check_if_debug() const;
    void canonicalize_columns(int t);
    void canonicalize_rows();

    const TransformedDataset& data_;
    SamplerConfig config_;
    ModelState state_;
    std::vector<std::vector<int>> col_sizes_;
    std::vector<int> row_sizes_;
    // Valid until the next allocation move.
    mutable std::vector<std::vector<std::vector<CellStats>>> stats_cache_;
    mutable bool stats_valid_ = false;
};

/// Everything Stage 1 produces.
struct Stage1Result {
    ChainTrace trace_a;                   // unrestricted: column and row allocations
    std::vector<Allocation> column_ls;    // per platform column least-squares allocation
    ChainTrace trace_b;                   // columns fixed: row allocations
    Allocation row_ls;
    ChainTrace trace_c;                   // both fixed: latent matrices and sigma
    std::vector<MatrixXd> phi_mean;
    std::vector<MatrixXi> atom_ids;       // atom identities of the last Stage 1c sample
    VectorXd sigma_mean;
    VectorXd sigma_median;
    std::vector<double> final_discount;

    ClusterState point_state() const { return {column_ls, row_ls}; }
    LatentMatrices point_latents() const;
};

Stage1Result run_stage1(const TransformedDataset& data, const SamplerConfig& config, Rng& rng);

/// Runs `sweeps` sweeps of the chosen kernels, recording into a trace.
struct KernelMask {
    bool columns = true;
    bool rows = true;
    bool atoms = true;
    bool sigma = true;
    bool discount = true;
};
ChainTrace run_chain(BiclusterSampler& sampler, Stage stage, int sweeps, int burn_in, int thin, KernelMask mask,
                     Rng& rng);

} // namespace mobnp
