#include "mobnp/mcmc_engine.hpp"

#include "mobnp/errors.hpp"
#include "mobnp/linkage.hpp"
#include "mobnp/point_estimates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mobnp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

AtomStore make_store(const SamplerConfig& config, int T) {
    if (config.fixed_measure)
        return AtomStore::fixed(T, *config.fixed_measure);
    const auto& hp = config.hyper;
    return AtomStore::hierarchical(T, hp.alpha3, hp.alpha4, hp.mu0, hp.tau0);
}

std::vector<double> starting_discount(const Hyperparameters& hp, int T) {
    if (hp.discount.empty())
        return std::vector<double>(T, 0.0);
    if (static_cast<int>(hp.discount.size()) != T)
        throw ConfigError("discount vector length differs from the number of platforms");
    return hp.discount;
}

/// Cell statistics for arbitrary allocations, indexed [t][k][h].
std::vector<std::vector<std::vector<CellStats>>> compute_cell_stats(const TransformedDataset& data,
                                                                    const ClusterState& clusters) {
    const int T = data.num_platforms();
    const int H = clusters.H();
    std::vector<std::vector<std::vector<CellStats>>> stats(T);
    for (int t = 0; t < T; ++t) {
        const auto& Z = data.platforms[t].values;
        const auto& cols = clusters.column_alloc[t];
        stats[t].assign(clusters.K(t), std::vector<CellStats>(H));
        for (Eigen::Index j = 0; j < Z.cols(); ++j) {
            auto& col = stats[t][cols[j]];
            for (Eigen::Index i = 0; i < Z.rows(); ++i) {
                CellStats& s = col[clusters.row_alloc[i]];
                const double z = Z(i, j);
                s.count += 1.0;
                s.sum += z;
                s.sumsq += z * z;
            }
        }
    }
    return stats;
}

std::vector<double> sigma_vector(const VectorXd& sigma) { return {sigma.data(), sigma.data() + sigma.size()}; }

} // namespace

std::string to_string(Stage stage) {
    switch (stage) {
    case Stage::s1a:
        return "1a";
    case Stage::s1b:
        return "1b";
    case Stage::s1c:
        return "1c";
    case Stage::s2:
        return "2";
    }
    return "?";
}

void ChainSchedule::validate() const {
    if (sweeps_1a < 1 || sweeps_1b < 1 || sweeps_1c < 1)
        throw ConfigError("chain schedule: every stage needs at least one sweep");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0))
        throw ConfigError("chain schedule: burn-in fraction must lie in [0,1)");
    if (thin < 1)
        throw ConfigError("chain schedule: thin must be at least 1");
}

LatentMatrices ModelState::latents() const {
    LatentMatrices out;
    const int T = store.num_platforms();
    for (int t = 0; t < T; ++t) {
        out.phi.push_back(store.phi(t));
        out.atom_ids.push_back(store.atom_ids(t));
    }
    out.sigma = sigma;
    return out;
}

ModelState init_state(const TransformedDataset& data, const SamplerConfig& config) {
    data.validate();
    config.hyper.validate();
    if (config.fixed_measure)
        throw ConfigError("init_state: the data-driven start needs the atom hierarchy");
    const int T = data.num_platforms();
    const int n = data.n();
    ClusterState clusters;
    clusters.row_alloc.assign(n, 0);
    for (int t = 0; t < T; ++t) {
        const auto& Z = data.platforms[t].values;
        clusters.column_alloc.push_back(complete_linkage_cut(correlation_distance(Z), config.init_cut_height));
    }

    ModelState state{clusters, make_store(config, T), VectorXd(T), starting_discount(config.hyper, T)};
    std::vector<int> K(T);
    for (int t = 0; t < T; ++t)
        K[t] = clusters.K(t);
    state.store.reset_grid(1, K);

    const auto stats = compute_cell_stats(data, clusters);
    double sse_all = 0.0, count_all = 0.0;
    for (int t = 0; t < T; ++t) {
        double sse = 0.0, count = 0.0;
        for (int k = 0; k < K[t]; ++k) {
            const CellStats& s = stats[t][k][0];
            const double mean = s.sum / s.count;
            state.store.set_cell_value(t, 0, k, mean);
            sse += std::max(0.0, s.sumsq - s.sum * mean);
            count += s.count;
        }
        const double scale = std::max(1.0, data.platforms[t].values.cwiseAbs().maxCoeff());
        state.sigma(t) = std::max(std::sqrt(sse / count), 1e-3 * scale);
        sse_all += sse;
        count_all += count;
    }
    if (!config.per_platform_sigma) {
        const double shared = std::max(std::sqrt(sse_all / count_all), state.sigma.minCoeff());
        state.sigma.setConstant(shared);
    }
    return state;
}

ModelState seat_state(const TransformedDataset& data, const SamplerConfig& config, ClusterState clusters,
                      VectorXd sigma, std::vector<double> discount, Rng& rng) {
    clusters.validate();
    const int T = data.num_platforms();
    const int H = clusters.H();
    ModelState state{clusters, make_store(config, T), std::move(sigma), std::move(discount)};
    std::vector<int> K(T);
    for (int t = 0; t < T; ++t)
        K[t] = clusters.K(t);
    state.store.reset_grid(0, K);
    const auto stats = compute_cell_stats(data, clusters);
    const auto sig = sigma_vector(state.sigma);
    for (int h = 0; h < H; ++h) {
        std::vector<std::vector<CellStats>> row(T);
        for (int t = 0; t < T; ++t) {
            row[t].resize(K[t]);
            for (int k = 0; k < K[t]; ++k)
                row[t][k] = stats[t][k][h];
        }
        state.store.add_row(row, sig, rng);
    }
    return state;
}

InverseGammaPrior sigma_full_conditional(double residual_ss, double residual_count, const InverseGammaPrior& prior) {
    return {prior.shape + 0.5 * residual_count, prior.scale + 0.5 * residual_ss};
}

DiscountMove discount_mh_step(double d, std::span<const int> sizes, double alpha, const DiscountProposal& proposal,
                              Rng& rng) {
    // Prior weights: mass 1/2 at zero, density 1/2 on (0,1).
    constexpr double kHalf = 0.5;
    const double rho = proposal.jump_to_zero_prob;
    double proposed;
    double log_ratio;
    if (d == 0.0) {
        proposed = rng.uniform();
        // forward: U(0,1) density 1; reverse: jump to zero with probability rho
        log_ratio = std::log(kHalf) + pdp_log_eppf(sizes, proposed, alpha) + std::log(rho) -
                    (std::log(kHalf) + pdp_log_eppf(sizes, 0.0, alpha));
    } else if (rng.uniform() < rho) {
        proposed = 0.0;
        log_ratio = std::log(kHalf) + pdp_log_eppf(sizes, 0.0, alpha) -
                    (std::log(kHalf) + pdp_log_eppf(sizes, d, alpha) + std::log(rho));
    } else {
        proposed = d + proposal.random_walk_sd * rng.normal();
        // Reflect into (0,1); reflection keeps the walk symmetric.
        for (;;) {
            if (proposed < 0.0)
                proposed = -proposed;
            else if (proposed >= 1.0)
                proposed = 2.0 - proposed;
            else
                break;
        }
        if (proposed <= 0.0 || proposed >= 1.0)
            return {d, false};
        log_ratio = pdp_log_eppf(sizes, proposed, alpha) - pdp_log_eppf(sizes, d, alpha);
    }
    if (std::log(rng.uniform()) < log_ratio)
        return {proposed, true};
    return {d, false};
}

// ---------------------------------------------------------------------------

BiclusterSampler::BiclusterSampler(const TransformedDataset& data, SamplerConfig config, ModelState state)
    : data_(data), config_(std::move(config)), state_(std::move(state)) {
    const int T = data_.num_platforms();
    if (state_.clusters.num_platforms() != T || state_.store.num_platforms() != T || state_.sigma.size() != T)
        throw StructuralError("BiclusterSampler: platform count mismatch");
    if (static_cast<int>(state_.discount.size()) != T)
        state_.discount = starting_discount(config_.hyper, T);
    state_.clusters.validate();
    col_sizes_.resize(T);
    for (int t = 0; t < T; ++t) {
        if (static_cast<int>(state_.clusters.column_alloc[t].size()) != data_.platforms[t].p())
            throw StructuralError("BiclusterSampler: column allocation length mismatch");
        col_sizes_[t] = cluster_sizes(state_.clusters.column_alloc[t]);
        if (state_.store.cols(t) != static_cast<int>(col_sizes_[t].size()))
            throw StructuralError("BiclusterSampler: latent column count mismatch");
    }
    if (static_cast<int>(state_.clusters.row_alloc.size()) != data_.n())
        throw StructuralError("BiclusterSampler: row allocation length mismatch");
    row_sizes_ = cluster_sizes(state_.clusters.row_alloc);
    if (state_.store.rows() != static_cast<int>(row_sizes_.size()))
        throw StructuralError("BiclusterSampler: latent row count mismatch");
    check_if_debug();
}

void BiclusterSampler::update_column_allocations(int t, Rng& rng) {
    stats_valid_ = false;
    const auto& Z = data_.platforms[t].values;
    const int n = static_cast<int>(Z.rows());
    const int p = static_cast<int>(Z.cols());
    const int H = static_cast<int>(row_sizes_.size());
    const auto& rows = state_.clusters.row_alloc;
    auto& cols = state_.clusters.column_alloc[t];
    auto& sizes = col_sizes_[t];
    AtomStore& store = state_.store;
    const double sigma = state_.sigma(t);
    const double inv_var = 1.0 / (sigma * sigma);
    const double d = state_.discount[t];
    const double alpha = config_.hyper.alpha1;
    const double log_norm = std::log(2.0 * M_PI * sigma * sigma);

    // Per-probe sums over each row cluster; rows stay fixed during the sweep.
    MatrixXd S = MatrixXd::Zero(H, p);
    MatrixXd Q = MatrixXd::Zero(H, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i) {
            const double z = Z(i, j);
            S(rows[i], j) += z;
            Q(rows[i], j) += z * z;
        }

    std::vector<double> logw;
    std::vector<CellStats> probe_stats(H);
    CellPredictive pred = store.predictive(t);
    bool pred_stale = false;
    for (int j = 0; j < p; ++j) {
        const int old = cols[j];
        if (--sizes[old] == 0) {
            store.remove_column(t, old);
            sizes.erase(sizes.begin() + old);
            for (int& c : cols)
                if (c > old)
                    --c;
            pred_stale = true;
        }
        if (pred_stale) {
            pred = store.predictive(t);
            pred_stale = false;
        }
        const int K = static_cast<int>(sizes.size());
        logw.resize(K + 1);
        for (int k = 0; k < K; ++k) {
            const auto phi = store.column_values(t, k);
            double acc = 0.0;
            for (int h = 0; h < H; ++h)
                acc += phi[h] * (S(h, j) - 0.5 * row_sizes_[h] * phi[h]);
            logw[k] = std::log(sizes[k] - d) + acc * inv_var;
        }
        // The dropped terms -n_h/2 log(2 pi sigma^2) - Q_hj / (2 sigma^2) are removed from the marginal too.
        double fresh = std::log(alpha + K * d);
        for (int h = 0; h < H; ++h) {
            probe_stats[h] = {static_cast<double>(row_sizes_[h]), S(h, j), Q(h, j)};
            fresh += pred.log_marginal(probe_stats[h], sigma) + 0.5 * row_sizes_[h] * log_norm + 0.5 * Q(h, j) * inv_var;
        }
        logw[K] = fresh;
        int k = rng.categorical_log(logw);
        if (k == K) {
            store.add_column(t, probe_stats, sigma, rng);
            sizes.push_back(0);
            pred_stale = true;
        }
        cols[j] = k;
        ++sizes[k];
    }
    canonicalize_columns(t);
    check_if_debug();
}

void BiclusterSampler::update_row_allocations(Rng& rng) {
    stats_valid_ = false;
    const int T = data_.num_platforms();
    const int n = data_.n();
    auto& rows = state_.clusters.row_alloc;
    AtomStore& store = state_.store;
    const double alpha = config_.hyper.alpha2;

    // Per-subject sums over each column cluster; columns stay fixed during the sweep.
    std::vector<MatrixXd> A(T), B(T);
    std::vector<double> inv_var(T), log_norm(T);
    std::vector<CellPredictive> pred(T);
    for (int t = 0; t < T; ++t) {
        const auto& Z = data_.platforms[t].values;
        const auto& cols = state_.clusters.column_alloc[t];
        const int K = static_cast<int>(col_sizes_[t].size());
        A[t] = MatrixXd::Zero(n, K);
        B[t] = MatrixXd::Zero(n, K);
        for (Eigen::Index j = 0; j < Z.cols(); ++j) {
            A[t].col(cols[j]) += Z.col(j);
            B[t].col(cols[j]) += Z.col(j).cwiseAbs2();
        }
        inv_var[t] = 1.0 / (state_.sigma(t) * state_.sigma(t));
        log_norm[t] = std::log(2.0 * M_PI * state_.sigma(t) * state_.sigma(t));
        pred[t] = store.predictive(t);
    }
    const auto sig = sigma_vector(state_.sigma);

    std::vector<double> logw;
    std::vector<std::vector<CellStats>> subject_stats(T);
    for (int i = 0; i < n; ++i) {
        const int old = rows[i];
        if (--row_sizes_[old] == 0) {
            store.remove_row(old);
            row_sizes_.erase(row_sizes_.begin() + old);
            for (int& r : rows)
                if (r > old)
                    --r;
            for (int t = 0; t < T; ++t)
                pred[t] = store.predictive(t);
        }
        const int H = static_cast<int>(row_sizes_.size());
        logw.assign(H + 1, 0.0);
        for (int h = 0; h < H; ++h)
            logw[h] = std::log(static_cast<double>(row_sizes_[h]));
        double fresh = std::log(alpha);
        for (int t = 0; t < T; ++t) {
            const int K = static_cast<int>(col_sizes_[t].size());
            subject_stats[t].resize(K);
            for (int k = 0; k < K; ++k) {
                const double a = A[t](i, k);
                const double b = B[t](i, k);
                const double count = col_sizes_[t][k];
                const auto phi = store.column_values(t, k);
                for (int h = 0; h < H; ++h)
                    logw[h] += phi[h] * (a - 0.5 * count * phi[h]) * inv_var[t];
                subject_stats[t][k] = {count, a, b};
                fresh += pred[t].log_marginal(subject_stats[t][k], sig[t]) + 0.5 * count * log_norm[t] +
                         0.5 * b * inv_var[t];
            }
        }
        logw[H] = fresh;
        const int h = rng.categorical_log(logw);
        if (h == H) {
            store.add_row(subject_stats, sig, rng);
            row_sizes_.push_back(0);
            for (int t = 0; t < T; ++t)
                pred[t] = store.predictive(t);
        }
        rows[i] = h;
        ++row_sizes_[h];
    }
    canonicalize_rows();
    check_if_debug();
}

void BiclusterSampler::update_latent_atoms(Rng& rng) {
    state_.store.update(cell_stats(), sigma_vector(state_.sigma), rng);
    check_if_debug();
}

void BiclusterSampler::update_sigma(Rng& rng) {
    const auto& stats = cell_stats();
    const int T = data_.num_platforms();
    std::vector<double> sse(T, 0.0), count(T, 0.0);
    for (int t = 0; t < T; ++t)
        for (int k = 0; k < state_.store.cols(t); ++k)
            for (int h = 0; h < state_.store.rows(); ++h) {
                const CellStats& s = stats[t][k][h];
                const double phi = state_.store.value(t, h, k);
                sse[t] += std::max(0.0, s.sumsq - 2.0 * phi * s.sum + s.count * phi * phi);
                count[t] += s.count;
            }
    const auto& prior = config_.hyper.sigma_prior;
    if (config_.per_platform_sigma) {
        for (int t = 0; t < T; ++t) {
            const auto post = sigma_full_conditional(sse[t], count[t], prior);
            state_.sigma(t) = std::sqrt(rng.inverse_gamma(post.shape, post.scale));
        }
    } else {
        const double total_sse = std::accumulate(sse.begin(), sse.end(), 0.0);
        const double total_count = std::accumulate(count.begin(), count.end(), 0.0);
        const auto post = sigma_full_conditional(total_sse, total_count, prior);
        state_.sigma.setConstant(std::sqrt(rng.inverse_gamma(post.shape, post.scale)));
    }
}

bool BiclusterSampler::update_discount(int t, Rng& rng) {
    if (!config_.hyper.sample_discount)
        return false;
    const auto move = discount_mh_step(state_.discount[t], col_sizes_[t], config_.hyper.alpha1,
                                       config_.discount_proposal, rng);
    state_.discount[t] = move.value;
    return move.accepted;
}

const std::vector<std::vector<std::vector<CellStats>>>& BiclusterSampler::cell_stats() const {
    if (!stats_valid_) {
        stats_cache_ = compute_cell_stats(data_, state_.clusters);
        stats_valid_ = true;
    }
    return stats_cache_;
}

double BiclusterSampler::log_likelihood_from_stats() const {
    const auto& stats = cell_stats();
    double ll = 0.0;
    for (int t = 0; t < data_.num_platforms(); ++t)
        for (int k = 0; k < state_.store.cols(t); ++k)
            for (int h = 0; h < state_.store.rows(); ++h)
                ll += block_log_likelihood(stats[t][k][h], state_.store.value(t, h, k), state_.sigma(t));
    return ll;
}

double BiclusterSampler::log_posterior() const {
    const int T = data_.num_platforms();
    double lp = log_likelihood_from_stats();
    for (int t = 0; t < T; ++t)
        lp += pdp_log_eppf(col_sizes_[t], state_.discount[t], config_.hyper.alpha1) + std::log(0.5);
    lp += pdp_log_eppf(row_sizes_, 0.0, config_.hyper.alpha2);
    lp += state_.store.log_prior();
    const auto& prior = config_.hyper.sigma_prior;
    const int noise_params = config_.per_platform_sigma ? T : 1;
    for (int t = 0; t < noise_params; ++t) {
        const double v = state_.sigma(t) * state_.sigma(t);
        lp += prior.shape * std::log(prior.scale) - std::lgamma(prior.shape) - (prior.shape + 1.0) * std::log(v) -
              prior.scale / v;
    }
    return lp;
}

void BiclusterSampler::check_invariants() const {
    state_.clusters.validate();
    const int T = data_.num_platforms();
    if (cluster_sizes(state_.clusters.row_alloc) != row_sizes_ || state_.store.rows() != static_cast<int>(row_sizes_.size()))
        throw StructuralError("sampler: row cluster sizes out of sync");
    for (int t = 0; t < T; ++t)
        if (cluster_sizes(state_.clusters.column_alloc[t]) != col_sizes_[t] ||
            state_.store.cols(t) != static_cast<int>(col_sizes_[t].size()))
            throw StructuralError("sampler: column cluster sizes out of sync");
    state_.store.check_invariants();
    const double cached = log_likelihood_from_stats();
    const double direct = dataset_log_likelihood(data_, state_.clusters, state_.latents());
    if (std::abs(cached - direct) > 1e-8 * std::max(1.0, std::abs(direct)))
        throw StructuralError("sampler: statistic-based log-likelihood differs from direct evaluation");
}

void BiclusterSampler::check_if_debug() const {
    if (config_.debug_checks)
        check_invariants();
}

void BiclusterSampler::canonicalize_columns(int t) {
    auto& cols = state_.clusters.column_alloc[t];
    const int K = static_cast<int>(col_sizes_[t].size());
    std::vector<int> new_of_old(K, -1);
    int next = 0;
    for (int& c : cols) {
        if (new_of_old[c] < 0)
            new_of_old[c] = next++;
        c = new_of_old[c];
    }
    std::vector<int> sizes(K);
    for (int k = 0; k < K; ++k)
        sizes[new_of_old[k]] = col_sizes_[t][k];
    col_sizes_[t] = std::move(sizes);
    state_.store.permute_columns(t, new_of_old);
}

void BiclusterSampler::canonicalize_rows() {
    auto& rows = state_.clusters.row_alloc;
    const int H = static_cast<int>(row_sizes_.size());
    std::vector<int> new_of_old(H, -1);
    int next = 0;
    for (int& r : rows) {
        if (new_of_old[r] < 0)
            new_of_old[r] = next++;
        r = new_of_old[r];
    }
    std::vector<int> sizes(H);
    for (int h = 0; h < H; ++h)
        sizes[new_of_old[h]] = row_sizes_[h];
    row_sizes_ = std::move(sizes);
    state_.store.permute_rows(new_of_old);
}

// ---------------------------------------------------------------------------

ChainTrace run_chain(BiclusterSampler& sampler, Stage stage, int sweeps, int burn_in, int thin, KernelMask mask,
                     Rng& rng) {
    ChainTrace trace;
    trace.stage = stage;
    trace.sweeps = sweeps;
    trace.burn_in = burn_in;
    trace.thin = thin;
    trace.seed = rng.seed();
    const int T = sampler.state().clusters.num_platforms();
    std::vector<int> accepted(T, 0);
    int discount_moves = 0;
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        if (mask.rows)
            sampler.update_row_allocations(rng);
        if (mask.columns)
            for (int t = 0; t < T; ++t)
                sampler.update_column_allocations(t, rng);
        if (mask.atoms)
            sampler.update_latent_atoms(rng);
        if (mask.sigma)
            sampler.update_sigma(rng);
        if (mask.discount) {
            ++discount_moves;
            for (int t = 0; t < T; ++t)
                accepted[t] += sampler.update_discount(t, rng) ? 1 : 0;
        }

        const ModelState& st = sampler.state();
        DiagnosticRow row;
        row.stage = stage;
        row.sweep = sweep;
        for (int t = 0; t < T; ++t)
            row.K.push_back(st.store.cols(t));
        row.H = st.store.rows();
        row.sigma = st.sigma;
        row.discount = st.discount;
        row.live_atoms = st.store.num_live_atoms();
        row.log_posterior = sampler.log_posterior();
        trace.diagnostics.push_back(std::move(row));

        if (!trace.records(sweep))
            continue;
        TraceSample sample;
        if (stage == Stage::s1a)
            sample.columns = st.clusters.column_alloc;
        if (stage == Stage::s1a || stage == Stage::s1b)
            sample.rows = st.clusters.row_alloc;
        if (stage == Stage::s1c) {
            for (int t = 0; t < T; ++t) {
                sample.phi.push_back(st.store.phi(t));
                sample.atom_ids.push_back(st.store.atom_ids(t));
            }
        }
        sample.sigma = st.sigma;
        sample.discount = st.discount;
        trace.samples.push_back(std::move(sample));
    }
    trace.discount_acceptance.resize(T, 0.0);
    if (discount_moves > 0)
        for (int t = 0; t < T; ++t)
            trace.discount_acceptance[t] = static_cast<double>(accepted[t]) / discount_moves;
    return trace;
}

LatentMatrices Stage1Result::point_latents() const {
    LatentMatrices out;
    out.phi = phi_mean;
    out.atom_ids = atom_ids;
    out.sigma = sigma_mean;
    return out;
}

Stage1Result run_stage1(const TransformedDataset& data, const SamplerConfig& config, Rng& rng) {
    config.schedule.validate();
    const auto& sched = config.schedule;
    const int T = data.num_platforms();
    Stage1Result out;

    Rng rng_a = rng.split(1);
    BiclusterSampler stage_a(data, config, init_state(data, config));
    out.trace_a = run_chain(stage_a, Stage::s1a, sched.sweeps_1a, sched.burn_in(sched.sweeps_1a), sched.thin, {},
                            rng_a);
    for (int t = 0; t < T; ++t) {
        std::vector<Allocation> samples;
        samples.reserve(out.trace_a.samples.size());
        for (const auto& s : out.trace_a.samples)
            samples.push_back(s.columns[t]);
        out.column_ls.push_back(least_squares_allocation(samples).allocation);
    }
    out.final_discount = stage_a.state().discount;

    Rng rng_b = rng.split(2);
    ClusterState start_b{out.column_ls, stage_a.state().clusters.row_alloc};
    BiclusterSampler stage_b(data, config,
                             seat_state(data, config, start_b, stage_a.state().sigma, out.final_discount, rng_b));
    out.trace_b = run_chain(stage_b, Stage::s1b, sched.sweeps_1b, sched.burn_in(sched.sweeps_1b), sched.thin,
                            {.columns = false, .discount = false}, rng_b);
    {
        std::vector<Allocation> samples;
        for (const auto& s : out.trace_b.samples)
            samples.push_back(s.rows);
        out.row_ls = least_squares_allocation(samples).allocation;
    }

    Rng rng_c = rng.split(3);
    ClusterState start_c{out.column_ls, out.row_ls};
    BiclusterSampler stage_c(data, config,
                             seat_state(data, config, start_c, stage_b.state().sigma, out.final_discount, rng_c));
    out.trace_c = run_chain(stage_c, Stage::s1c, sched.sweeps_1c, sched.burn_in(sched.sweeps_1c), sched.thin,
                            {.columns = false, .rows = false, .discount = false}, rng_c);

    const auto& samples = out.trace_c.samples;
    const double M = static_cast<double>(samples.size());
    for (int t = 0; t < T; ++t) {
        MatrixXd mean = MatrixXd::Zero(samples.front().phi[t].rows(), samples.front().phi[t].cols());
        for (const auto& s : samples)
            mean += s.phi[t];
        out.phi_mean.push_back(mean / M);
        out.atom_ids.push_back(samples.back().atom_ids[t]);
    }
    out.sigma_mean = VectorXd::Zero(T);
    out.sigma_median = VectorXd::Zero(T);
    for (int t = 0; t < T; ++t) {
        std::vector<double> draws;
        for (const auto& s : samples)
            draws.push_back(s.sigma(t));
        out.sigma_mean(t) = std::accumulate(draws.begin(), draws.end(), 0.0) / M;
        std::sort(draws.begin(), draws.end());
        const std::size_t mid = draws.size() / 2;
        out.sigma_median(t) = draws.size() % 2 ? draws[mid] : 0.5 * (draws[mid - 1] + draws[mid]);
    }
    return out;
}

} // namespace mobnp
