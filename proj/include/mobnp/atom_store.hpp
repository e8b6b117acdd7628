#pragma once

#include "mobnp/partition_priors.hpp"
#include "mobnp/random.hpp"
#include "mobnp/types.hpp"

#include <limits>
#include <span>
#include <vector>

namespace mobnp {

/// Sufficient statistics of the data cells mapped to one latent cell.
struct CellStats {
    double count = 0.0;
    double sum = 0.0;
    double sumsq = 0.0;

    CellStats& operator+=(const CellStats& o) {
        count += o.count;
        sum += o.sum;
        sumsq += o.sumsq;
        return *this;
    }
};

/// Gaussian log-likelihood of a block of data cells sharing mean theta.
double block_log_likelihood(const CellStats& s, double theta, double sigma);
/// Same block with theta integrated against N(mu0, tau0^2).
double block_log_marginal(const CellStats& s, double sigma, double mu0, double tau0);

/// Normal full conditional of an atom given pooled precision-weighted data.
struct NormalPosterior {
    double mean;
    double sd;
};
NormalPosterior atom_posterior(double prior_mean, double prior_sd, double weighted_sum, double weighted_count);

/**
 * Prior predictive of a fresh latent cell in one platform: a mixture of
 * point masses at the live atoms plus, under the hierarchy, a continuous
 * N(mu0, tau0^2) component for a brand-new atom.
 */
struct CellPredictive {
    std::vector<int> atoms;
    std::vector<double> values;
    std::vector<double> log_weights;
    double log_weight_new = -std::numeric_limits<double>::infinity();
    double mu0 = 0.0;
    double tau0 = 1.0;

    /// log of the predictive density of a block's data, the cell value integrated out.
    double log_marginal(const CellStats& s, double sigma) const;
};

/**
 * Atom hierarchy behind the latent matrices.
 *
 * In hierarchical mode cells are customers of per-platform restaurants
 * (G_t ~ DP(alpha3, G_0)); tables serve dishes that are global atoms of
 * G_0 ~ DP(alpha4, N(mu0, tau0^2)). Cells in different platforms or row
 * clusters that reach the same global atom hold bitwise-equal values.
 *
 * In fixed mode every G_t is one known discrete measure; cells point at its
 * atoms directly. This mode exists for exact-enumeration checks.
 *
 * The store owns the cell grid: cells_[t][k][h] is a table id (hierarchical)
 * or an atom id (fixed) for row cluster h, column cluster k.
 */
class AtomStore {
  public:
    enum class Mode { hierarchical, fixed };

    static AtomStore hierarchical(int num_platforms, double alpha3, double alpha4, double mu0, double tau0);
    static AtomStore fixed(int num_platforms, const DiscreteMeasure& measure);

    Mode mode() const { return mode_; }
    int num_platforms() const { return static_cast<int>(cells_.size()); }
    int rows() const { return rows_; }
    int cols(int t) const { return static_cast<int>(cells_[t].size()); }

    double value(int t, int h, int k) const { return values_[t][k][h]; }
    std::span<const double> column_values(int t, int k) const { return values_[t][k]; }
    int atom_id(int t, int h, int k) const;
    MatrixXd phi(int t) const;
    MatrixXi atom_ids(int t) const;

    int num_live_atoms() const;
    int num_tables(int t) const;
    int num_distinct_values(int t) const;

    CellPredictive predictive(int t) const;

    // Structural edits. New cells are seated by their data (posterior draw).
    void add_column(int t, std::span<const CellStats> stats_by_row, double sigma, Rng& rng);
    void add_row(const std::vector<std::vector<CellStats>>& stats_by_platform_col, std::span<const double> sigma,
                 Rng& rng);
    /// Clears all atoms and tables and shapes the grid with unseated cells.
    void reset_grid(int rows, std::span<const int> cols);
    void remove_column(int t, int k);
    void remove_row(int h);
    void permute_columns(int t, std::span<const int> new_of_old);
    void permute_rows(std::span<const int> new_of_old);

    /// Seats a cell on the atom holding exactly this value, creating it if needed (initialisation).
    void set_cell_value(int t, int h, int k, double value);
    /// Appends a row / column whose cells are drawn from the prior predictive.
    void add_prior_row(Rng& rng);
    void add_prior_column(int t, Rng& rng);

    /// Full latent update: table moves, dish moves and atom values given cell statistics
    /// indexed [t][k][h].
    void update(const std::vector<std::vector<std::vector<CellStats>>>& stats, std::span<const double> sigma,
                Rng& rng);

    /// Log prior of the seating arrangement and atom values.
    double log_prior() const;

    /// Throws StructuralError when reference counts or cached values disagree with the grid.
    void check_invariants() const;

  private:
    struct Atom {
        double value = 0.0;
        int tables = 0;     // hierarchical: tables serving it; fixed: unused
        bool alive = false;
    };
    struct Table {
        int atom = -1;
        int customers = 0;
        bool alive = false;
    };

    AtomStore() = default;

    int new_atom(double value);
    void release_atom(int a);
    int new_table(int t, int atom);
    void add_customer(int t, int handle);
    void remove_customer(int t, int handle);
    int handle_atom(int t, int handle) const;
    double handle_value(int t, int handle) const { return atoms_[handle_atom(t, handle)].value; }

    /// Seats one cell given its data; returns the handle.
    int seat_given_data(int t, const CellStats& s, double sigma, Rng& rng);
    int seat_at_atom(int t, int atom, Rng& rng);
    void refresh_values();

    void resample_tables(int t, const std::vector<std::vector<CellStats>>& stats, double sigma, Rng& rng);
    void resample_dishes(const std::vector<std::vector<std::vector<CellStats>>>& stats,
                         std::span<const double> sigma, Rng& rng);
    void resample_atom_values(const std::vector<std::vector<std::vector<CellStats>>>& stats,
                              std::span<const double> sigma, Rng& rng);

    Mode mode_ = Mode::hierarchical;
    double alpha3_ = 1.0;
    double alpha4_ = 1.0;
    double mu0_ = 0.0;
    double tau0_ = 1.0;

    std::vector<Atom> atoms_;
    std::vector<int> free_atoms_;
    int total_tables_ = 0;
    std::vector<std::vector<Table>> tables_;
    std::vector<std::vector<int>> free_tables_;
    std::vector<int> customers_;                   // per platform
    std::vector<double> fixed_log_weights_;

    int rows_ = 0;
    std::vector<std::vector<std::vector<int>>> cells_;      // [t][k][h]
    std::vector<std::vector<std::vector<double>>> values_;  // [t][k][h]
};

} // namespace mobnp
