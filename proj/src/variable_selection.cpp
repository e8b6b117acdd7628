#include "mobnp/variable_selection.hpp"

#include "mobnp/errors.hpp"
#include "mobnp/format.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace mobnp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kRidge = 1e-8;

/// Cholesky factor of U'U, with a ridge when the Gram matrix is singular.
struct Gram {
    Eigen::LLT<MatrixXd> llt;
    MatrixXd gram;
    bool jittered = false;

    explicit Gram(const MatrixXd& U) : gram(U.transpose() * U) {
        llt.compute(gram);
        if (llt.info() != Eigen::Success || llt.matrixLLT().diagonal().minCoeff() <= 1e-12) {
            gram.diagonal().array() += kRidge;
            llt.compute(gram);
            jittered = true;
            if (llt.info() != Eigen::Success)
                throw DomainError("g-prior: Gram matrix is not positive definite even with a ridge");
        }
    }

    double log_det() const { return 2.0 * llt.matrixLLT().diagonal().array().log().sum(); }
};

double log_marginal_with(const Gram& gram, const MatrixXd& U, const VectorXd& y, double tau2, double g) {
    const double n = static_cast<double>(y.size());
    const double q = static_cast<double>(U.cols());
    const VectorXd b = U.transpose() * y;
    const double yPy = b.dot(gram.llt.solve(b));
    const double shrunk = y.squaredNorm() - g / (1.0 + g) * yPy;
    return -0.5 * n * (kLog2Pi + std::log(tau2)) - 0.5 * q * std::log1p(g) - shrunk / (2.0 * tau2);
}

} // namespace

std::array<int, 3> IndicatorTriplet::counts() const {
    std::array<int, 3> c{0, 0, 0};
    for (Role r : role)
        ++c[static_cast<int>(r)];
    return c;
}

void SplineConfig::validate() const {
    if (order < 1 || knots < 0)
        throw ConfigError("spline: order must be >= 1 and knots >= 0");
}

double empirical_quantile(std::vector<double> x, double prob) {
    if (x.empty())
        throw std::invalid_argument("empirical_quantile: empty sample");
    std::sort(x.begin(), x.end());
    const double pos = prob * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

MatrixXd spline_basis(const VectorXd& mu, const SplineConfig& spline) {
    spline.validate();
    const Eigen::Index n = mu.size();
    MatrixXd B(n, spline.columns());
    for (int s = 1; s <= spline.order; ++s)
        B.col(s - 1) = mu.array().pow(s);
    const std::vector<double> values(mu.data(), mu.data() + n);
    for (int l = 1; l <= spline.knots; ++l) {
        const double knot = empirical_quantile(values, static_cast<double>(l) / (spline.knots + 1));
        B.col(spline.order + l - 1) = (mu.array() - knot).max(0.0).pow(spline.order);
    }
    return B;
}

int design_columns(const IndicatorTriplet& triplets, const SplineConfig& spline) {
    const auto c = triplets.counts();
    return 1 + c[1] + c[2] * spline.columns();
}

MatrixXd build_design(const IndicatorTriplet& triplets, const MatrixXd& representatives, const SplineConfig& spline) {
    const Eigen::Index n = representatives.rows();
    if (representatives.cols() != triplets.K())
        throw StructuralError("build_design: one representative column per cluster expected");
    const int q = design_columns(triplets, spline);
    if (q >= n)
        throw ConstraintViolation("build_design: " + std::to_string(q) + " columns for " + std::to_string(n) +
                                  " subjects");
    MatrixXd U(n, q);
    U.col(0).setOnes();
    int col = 1;
    for (int k = 0; k < triplets.K(); ++k) {
        if (triplets.role[k] == Role::linear) {
            U.col(col++) = representatives.col(k);
        } else if (triplets.role[k] == Role::nonlinear) {
            U.middleCols(col, spline.columns()) = spline_basis(representatives.col(k), spline);
            col += spline.columns();
        }
    }
    return U;
}

double g_prior_log_marginal(const MatrixXd& U, const VectorXd& y, double tau2, double g) {
    if (!(tau2 > 0.0) || !(g > 0.0))
        throw std::invalid_argument("g_prior_log_marginal: tau2 and g must be positive");
    return log_marginal_with(Gram(U), U, y, tau2, g);
}

VectorXd augment_censored(const VectorXd& y, const ClinicalOutcomes& outcomes, const VectorXd& eta, double tau2,
                          Rng& rng) {
    VectorXd out = y;
    const double tau = std::sqrt(tau2);
    for (int i = 0; i < outcomes.n(); ++i)
        if (outcomes.event[i] == 0)
            out(i) = rng.truncated_normal_lower(eta(i), tau, std::log(outcomes.observed_time(i)));
        else
            out(i) = std::log(outcomes.observed_time(i));
    return out;
}

// ---------------------------------------------------------------------------

MergedClusters merge_clusters(const LatentMatrices& latents, const ClusterState& state) {
    const int T = state.num_platforms();
    if (latents.num_platforms() != T || static_cast<int>(latents.atom_ids.size()) != T)
        throw StructuralError("merge_clusters: platform count mismatch");
    MergedClusters out;
    std::map<std::vector<int>, int> index;
    out.merged_of.resize(T);
    for (int t = 0; t < T; ++t) {
        const MatrixXi& ids = latents.atom_ids[t];
        if (ids.cols() != state.K(t) || ids.rows() != state.H())
            throw StructuralError("merge_clusters: atom-id matrix shape mismatch");
        for (int k = 0; k < state.K(t); ++k) {
            std::vector<int> signature(ids.col(k).data(), ids.col(k).data() + ids.rows());
            auto [it, inserted] = index.try_emplace(signature, out.K);
            if (inserted) {
                out.source.push_back(signature);
                out.members.emplace_back();
                ++out.K;
            }
            out.merged_of[t].push_back(it->second);
        }
    }
    for (int t = 0; t < T; ++t)
        for (std::size_t j = 0; j < state.column_alloc[t].size(); ++j)
            out.members[out.merged_of[t][state.column_alloc[t][j]]].push_back({t, static_cast<int>(j)});
    for (const auto& m : out.members)
        out.sizes.push_back(static_cast<int>(m.size()));
    return out;
}

void SelectionState::validate(int n) const {
    const int q = design_columns(triplets, spline);
    if (q >= n)
        throw StructuralError("selection state: design has too many columns");
    if (beta.size() != q)
        throw StructuralError("selection state: beta length differs from the design width");
    const double total = omega[0] + omega[1] + omega[2];
    if (std::abs(total - 1.0) > 1e-9)
        throw StructuralError("selection state: omega does not sum to one");
    if (!(tau2 > 0.0))
        throw StructuralError("selection state: tau2 must be positive");
}

void SelectionConfig::validate() const {
    if (sweeps < 1 || thin < 1)
        throw ConfigError("selection: sweeps and thin must be positive");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
        throw ConfigError("selection: burn-in fraction must lie in [0,1)");
    if (!(fdr_alpha > 0.0 && fdr_alpha < 1.0))
        throw ConfigError("selection: FDR level must lie in (0,1)");
    spline.validate();
}

VectorXd SelectionProblem::member_values(int k, int m) const {
    const ProbeRef& ref = clusters.members[k][m];
    return data->platforms[ref.platform].values.col(ref.probe);
}

MatrixXd SelectionProblem::representative_matrix(const std::vector<int>& representatives) const {
    MatrixXd mu(n(), K());
    for (int k = 0; k < K(); ++k)
        mu.col(k) = member_values(k, representatives[k]);
    return mu;
}

namespace {

VectorXd draw_beta(const MatrixXd& U, const VectorXd& y, double tau2, double g, Rng& rng, int& jitter_events) {
    const Gram gram(U);
    jitter_events += gram.jittered ? 1 : 0;
    const double shrink = g / (1.0 + g);
    const VectorXd mean = shrink * gram.llt.solve(U.transpose() * y);
    VectorXd z(U.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z(i) = rng.normal();
    // L^{-T} z has covariance (U'U)^{-1}.
    const VectorXd noise = gram.llt.matrixU().solve(z);
    return mean + std::sqrt(shrink * tau2) * noise;
}

double draw_tau2(const MatrixXd& U, const VectorXd& y, const VectorXd& beta, double g, const InverseGammaPrior& prior,
                 Rng& rng) {
    const double n = static_cast<double>(y.size());
    const double q = static_cast<double>(U.cols());
    const VectorXd fitted = U * beta;
    const double rss = (y - fitted).squaredNorm();
    const double penalty = fitted.squaredNorm() / g;   // beta' U'U beta / g
    return rng.inverse_gamma(prior.shape + 0.5 * (n + q), prior.scale + 0.5 * (rss + penalty));
}

} // namespace

SelectionState initial_selection_state(const SelectionProblem& problem, const SelectionConfig& config, Rng& rng) {
    config.validate();
    problem.outcomes.validate();
    if (problem.n() < 2)
        throw ConfigError("selection: need at least two subjects");
    SelectionState s;
    s.spline = config.spline;
    s.triplets.role.assign(problem.K(), Role::excluded);
    for (int k = 0; k < problem.K(); ++k)
        s.representatives.push_back(rng.uniform_int(problem.clusters.sizes[k]));
    s.y = problem.outcomes.log_time;
    const double mean = s.y.mean();
    s.tau2 = std::max((s.y.array() - mean).square().sum() / std::max(1, problem.n() - 1), 1e-6);
    const MatrixXd U = MatrixXd::Ones(problem.n(), 1);
    s.beta = draw_beta(U, s.y, s.tau2, config.g_prior.value(problem.n()), rng, s.jitter_events);
    return s;
}

int elect_representative(const SelectionProblem& problem, const SelectionState& state, const SelectionConfig& config,
                         int k, Rng& rng) {
    const int members = problem.clusters.sizes[k];
    if (members == 1)
        return 0;
    if (state.triplets.role[k] == Role::excluded)
        return rng.uniform_int(members);
    const double g = config.g_prior.value(problem.n());
    MatrixXd mu = problem.representative_matrix(state.representatives);
    std::vector<double> lw(members);
    for (int m = 0; m < members; ++m) {
        mu.col(k) = problem.member_values(k, m);
        const MatrixXd U = build_design(state.triplets, mu, state.spline);
        const VectorXd fitted = U * state.beta;
        // Likelihood of y plus the g-prior density of beta, which depends on U through U'U.
        const Gram gram(U);
        lw[m] = -(state.y - fitted).squaredNorm() / (2.0 * state.tau2) + 0.5 * gram.log_det() -
                fitted.squaredNorm() / (2.0 * g * state.tau2);
    }
    return rng.categorical_log(lw);
}

void selection_sweep(const SelectionProblem& problem, SelectionState& state, const SelectionConfig& config, Rng& rng) {
    const int n = problem.n();
    const double g = config.g_prior.value(n);
    MatrixXd mu = problem.representative_matrix(state.representatives);

    // gamma_k with beta integrated out; omega enters through the prior weights.
    std::array<double, 3> lw;
    for (int k = 0; k < problem.K(); ++k) {
        for (int r = 0; r < 3; ++r) {
            state.triplets.role[k] = static_cast<Role>(r);
            if (design_columns(state.triplets, state.spline) >= n) {
                lw[r] = -std::numeric_limits<double>::infinity();
                continue;
            }
            const MatrixXd U = build_design(state.triplets, mu, state.spline);
            const Gram gram(U);
            state.jitter_events += gram.jittered ? 1 : 0;
            lw[r] = std::log(state.omega[r]) + log_marginal_with(gram, U, state.y, state.tau2, g);
        }
        state.triplets.role[k] = static_cast<Role>(rng.categorical_log(lw));
    }

    const auto c = state.triplets.counts();
    const std::array<double, 3> conc{1.0 + c[0], 1.0 + c[1], 1.0 + c[2]};
    const auto omega = rng.dirichlet(conc);
    std::copy(omega.begin(), omega.end(), state.omega.begin());

    MatrixXd U = build_design(state.triplets, mu, state.spline);
    state.beta = draw_beta(U, state.y, state.tau2, g, rng, state.jitter_events);
    state.tau2 = draw_tau2(U, state.y, state.beta, g, config.tau_prior, rng);

    for (int k = 0; k < problem.K(); ++k) {
        state.representatives[k] = elect_representative(problem, state, config, k, rng);
    }
    mu = problem.representative_matrix(state.representatives);
    U = build_design(state.triplets, mu, state.spline);
    state.y = augment_censored(state.y, problem.outcomes, U * state.beta, state.tau2, rng);
}

std::vector<double> inclusion_probs(const std::vector<SelectionSample>& trace) {
    if (trace.empty())
        throw std::invalid_argument("inclusion_probs: empty trace");
    const std::size_t K = trace.front().roles.size();
    std::vector<double> b(K, 0.0);
    for (const auto& s : trace)
        for (std::size_t k = 0; k < K; ++k)
            b[k] += s.roles[k] != Role::excluded ? 1.0 : 0.0;
    for (double& x : b)
        x /= static_cast<double>(trace.size());
    return b;
}

FdrSelection fdr_select(const std::vector<double>& b_hat, double alpha) {
    for (double b : b_hat)
        if (!(b >= 0.0 && b <= 1.0))
            throw std::invalid_argument("fdr_select: probabilities must lie in [0,1]");
    std::vector<double> sorted = b_hat;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    FdrSelection out;
    double cumulative = 0.0;
    std::size_t l = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += 1.0 - sorted[k];
        if (cumulative <= alpha)
            l = k + 1;
    }
    if (l == 0)
        return out;
    out.cutoff = sorted[l - 1];
    for (std::size_t k = 0; k < b_hat.size(); ++k)
        if (b_hat[k] >= *out.cutoff)
            out.selected.push_back(static_cast<int>(k));
    return out;
}

SelectionResult run_selection(const SelectionProblem& problem, const SelectionConfig& config, Rng& rng) {
    config.validate();
    SelectionState state = initial_selection_state(problem, config, rng);
    const int burn_in = static_cast<int>(config.burn_in_fraction * config.sweeps);
    SelectionResult out;
    for (int sweep = 0; sweep < config.sweeps; ++sweep) {
        selection_sweep(problem, state, config, rng);
        if (sweep >= burn_in && (sweep - burn_in) % config.thin == 0)
            out.trace.push_back({state.triplets.role, state.representatives, state.tau2});
    }
    out.b_hat = inclusion_probs(out.trace);
    out.selection = fdr_select(out.b_hat, config.fdr_alpha);
    out.jitter_events = state.jitter_events;
    const double M = static_cast<double>(out.trace.size());
    std::vector<std::vector<int>> rep_counts(problem.K());
    std::vector<std::array<int, 3>> role_counts(problem.K(), {0, 0, 0});
    for (int k = 0; k < problem.K(); ++k)
        rep_counts[k].assign(problem.clusters.sizes[k], 0);
    for (const auto& s : out.trace)
        for (int k = 0; k < problem.K(); ++k) {
            ++rep_counts[k][s.representatives[k]];
            ++role_counts[k][static_cast<int>(s.roles[k])];
        }
    out.representative_freq.resize(problem.K());
    out.role_freq.resize(problem.K());
    for (int k = 0; k < problem.K(); ++k) {
        for (int c : rep_counts[k])
            out.representative_freq[k].push_back(c / M);
        for (int r = 0; r < 3; ++r)
            out.role_freq[k][r] = role_counts[k][r] / M;
    }
    return out;
}

void write_selection_report(std::ostream& out, const SelectionProblem& problem, const SelectionResult& result) {
    const auto& data = *problem.data;
    out << "cluster_id,size,members,b_hat,selected,p_excluded,p_linear,p_nonlinear,representative_freq\n";
    std::vector<bool> selected(problem.K(), false);
    for (int k : result.selection.selected)
        selected[k] = true;
    for (int k = 0; k < problem.K(); ++k) {
        std::string members, freq;
        for (int m = 0; m < problem.clusters.sizes[k]; ++m) {
            const ProbeRef& ref = problem.clusters.members[k][m];
            const std::string name = fmt::format("{}:{}", ref.platform + 1, data.platforms[ref.platform].probe_names[ref.probe]);
            members += (m ? ";" : "") + name;
            freq += (m ? ";" : "") + name + "=" + format_double(result.representative_freq[k][m]);
        }
        out << k + 1 << ',' << problem.clusters.sizes[k] << ",\"" << members << "\"," << format_double(result.b_hat[k])
            << ',' << (selected[k] ? 1 : 0) << ',' << format_double(result.role_freq[k][0]) << ','
            << format_double(result.role_freq[k][1]) << ',' << format_double(result.role_freq[k][2]) << ",\"" << freq
            << "\"\n";
    }
}

} // namespace mobnp
