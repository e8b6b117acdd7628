#include "mobnp/simulation.hpp"

#include "mobnp/errors.hpp"
#include "mobnp/format.hpp"
#include "mobnp/partition_priors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

namespace mobnp {

void SimulationConfig::validate() const {
    if (n < 2)
        throw ConfigError("simulation: n must be at least 2");
    if (p.empty())
        throw ConfigError("simulation: at least one platform");
    if (discount.size() != p.size())
        throw ConfigError("simulation: one discount per platform");
    for (int pt : p)
        if (pt < 1)
            throw ConfigError("simulation: every platform needs a probe");
    for (double d : discount)
        if (!(d >= 0.0 && d < 1.0))
            throw ConfigError("simulation: discount outside [0,1)");
    if (!(alpha1 > 0 && alpha3 > 0 && alpha4 > 0 && tau0 > 0))
        throw ConfigError("simulation: masses and tau0 must be positive");
    if (!(sigma >= 0.0))
        throw ConfigError("simulation: sigma must be non-negative");
    if (h < 1 || truncation < 1)
        throw ConfigError("simulation: h and truncation must be positive");
}

SyntheticData generate_synthetic(const SimulationConfig& config, Rng& rng) {
    config.validate();
    const int T = config.num_platforms();
    SyntheticData out;
    SyntheticTruth& truth = out.truth;
    truth.config = config;
    truth.sigma = config.sigma;

    truth.row_alloc.resize(config.n);
    for (int& r : truth.row_alloc)
        r = rng.uniform_int(config.h);

    for (int t = 0; t < T; ++t)
        truth.column_alloc.push_back(sample_partition(config.p[t], config.discount[t], config.alpha1, rng));

    const double mu0 = config.mu0, tau0 = config.tau0;
    const DiscreteMeasure g0 =
        stick_breaking(config.alpha4, [mu0, tau0](Rng& r) { return r.normal(mu0, tau0); }, config.truncation, rng);
    for (int t = 0; t < T; ++t) {
        const DiscreteMeasure gt =
            stick_breaking(config.alpha3, [&g0](Rng& r) { return g0.sample(r); }, config.truncation, rng);
        const int K = num_clusters(truth.column_alloc[t]);
        MatrixXd phi(config.h, K);
        for (int k = 0; k < K; ++k)
            for (int h = 0; h < config.h; ++h)
                phi(h, k) = gt.sample(rng);
        truth.phi.push_back(std::move(phi));
    }

    std::vector<std::string> patients(config.n);
    for (int i = 0; i < config.n; ++i)
        patients[i] = fmt::format("S{:03d}", i + 1);
    for (int t = 0; t < T; ++t) {
        PlatformMatrix pm;
        pm.platform_id = t;
        pm.patient_ids = patients;
        pm.values.resize(config.n, config.p[t]);
        for (int j = 0; j < config.p[t]; ++j) {
            pm.probe_names.push_back(fmt::format("P{}_{:04d}", t + 1, j + 1));
            for (int i = 0; i < config.n; ++i)
                pm.values(i, j) =
                    truth.phi[t](truth.row_alloc[i], truth.column_alloc[t][j]) + config.sigma * rng.normal();
        }
        out.data.platforms.push_back(std::move(pm));
    }
    // Relabel rows canonically and keep only the phi rows of categories that occur.
    std::vector<int> categories;
    for (int r : truth.row_alloc)
        if (std::find(categories.begin(), categories.end(), r) == categories.end())
            categories.push_back(r);
    truth.row_alloc = canonicalize(truth.row_alloc);
    for (auto& phi : truth.phi) {
        MatrixXd kept(static_cast<Eigen::Index>(categories.size()), phi.cols());
        for (std::size_t h = 0; h < categories.size(); ++h)
            kept.row(static_cast<Eigen::Index>(h)) = phi.row(categories[h]);
        phi = std::move(kept);
    }
    return out;
}

double pair_agreement(const Allocation& a, const Allocation& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("pair_agreement: allocations differ in length");
    const std::size_t n = a.size();
    if (n < 2)
        throw std::invalid_argument("pair_agreement: need at least two items");
    std::size_t agree = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            agree += ((a[i] == a[j]) == (b[i] == b[j])) ? 1 : 0;
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return static_cast<double>(agree) / pairs;
}

double column_accuracy(const Allocation& estimate, const Allocation& truth) { return pair_agreement(estimate, truth); }
double row_accuracy(const Allocation& estimate, const Allocation& truth) { return pair_agreement(estimate, truth); }

R2Result fit_r2(const TransformedDataset& data, const ClusterState& state, const LatentMatrices& latents) {
    check_dimensions(data, state, latents);
    R2Result out;
    double sse_all = 0.0, sst_all = 0.0;
    for (int t = 0; t < data.num_platforms(); ++t) {
        const auto& Z = data.platforms[t].values;
        const double mean = Z.mean();
        double sse = 0.0, sst = 0.0;
        for (Eigen::Index j = 0; j < Z.cols(); ++j)
            for (Eigen::Index i = 0; i < Z.rows(); ++i) {
                const double r = Z(i, j) - latents.phi[t](state.row_alloc[i], state.column_alloc[t][j]);
                sse += r * r;
                sst += (Z(i, j) - mean) * (Z(i, j) - mean);
            }
        out.per_platform.push_back(sst > 0.0 ? 1.0 - sse / sst : std::numeric_limits<double>::quiet_NaN());
        sse_all += sse;
        sst_all += sst;
    }
    out.pooled = sst_all > 0.0 ? 1.0 - sse_all / sst_all : std::numeric_limits<double>::quiet_NaN();
    return out;
}

SurvivalTruth generate_survival(const TransformedDataset& data, const SurvivalConfig& config, Rng& rng) {
    if (config.platform < 0 || config.platform >= data.num_platforms())
        throw ConfigError("generate_survival: platform out of range");
    if (!(config.censor_fraction >= 0.0 && config.censor_fraction < 1.0))
        throw ConfigError("generate_survival: censor fraction outside [0,1)");
    const auto& Z = data.platforms[config.platform].values;
    const int n = static_cast<int>(Z.rows());
    const int p = static_cast<int>(Z.cols());

    MatrixXd standardized = Z.rowwise() - Z.colwise().mean();
    for (int j = 0; j < p; ++j) {
        const double norm = standardized.col(j).norm();
        if (norm > 0.0)
            standardized.col(j) /= norm / std::sqrt(static_cast<double>(n));
    }

    // Greedy pick in random order, skipping probes too correlated with earlier picks.
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    for (int j = p - 1; j > 0; --j)
        std::swap(order[j], order[rng.uniform_int(j + 1)]);
    SurvivalTruth out;
    for (int j : order) {
        if (static_cast<int>(out.predictors.size()) == config.num_predictors)
            break;
        if (standardized.col(j).squaredNorm() == 0.0)
            continue;
        bool ok = true;
        for (int k : out.predictors)
            if (std::abs(standardized.col(j).dot(standardized.col(k))) / n > config.max_abs_correlation) {
                ok = false;
                break;
            }
        if (ok)
            out.predictors.push_back(j);
    }
    const int q = static_cast<int>(out.predictors.size());
    out.coefficients.resize(q);
    for (int k = 0; k < q; ++k)
        out.coefficients(k) = rng.bernoulli(0.5) ? config.effect : -config.effect;

    VectorXd time(n);
    std::vector<int> event(n, 1);
    for (int i = 0; i < n; ++i) {
        double eta = 0.0;
        for (int k = 0; k < q; ++k)
            eta += out.coefficients(k) * standardized(i, out.predictors[k]);
        // Exponential with rate exp(-eta), so log T = eta + Gumbel noise.
        const double t_event = -std::log(rng.uniform()) * std::exp(eta);
        time(i) = t_event;
        if (rng.uniform() < config.censor_fraction) {
            event[i] = 0;
            time(i) = t_event * rng.uniform();
        }
    }
    out.outcomes = ClinicalOutcomes::from_times(time, std::move(event));
    return out;
}

SamplerConfig sampler_for_simulation(const SimulationConfig& sim, SamplerConfig base) {
    base.hyper.alpha1 = sim.alpha1;
    base.hyper.alpha3 = sim.alpha3;
    base.hyper.alpha4 = sim.alpha4;
    base.hyper.mu0 = sim.mu0;
    base.hyper.tau0 = sim.tau0;
    return base;
}

ReplicateResult run_replicate(const ReplicationConfig& config, int h, double sigma, int replicate,
                              std::uint64_t seed) {
    ReplicateResult res;
    res.setup_h = h;
    res.setup_sigma = sigma;
    res.replicate = replicate;
    const auto start = std::chrono::steady_clock::now();
    try {
        SimulationConfig sim = config.base;
        sim.h = h;
        sim.sigma = sigma;
        const Rng root(seed);
        // Streams depend on (h, replicate) only: common random numbers across sigma.
        const std::uint64_t cell = static_cast<std::uint64_t>(h) * 1000003ULL + static_cast<std::uint64_t>(replicate);
        Rng data_rng = root.split(2 * cell);
        Rng fit_rng = root.split(2 * cell + 1);
        const SyntheticData synth = generate_synthetic(sim, data_rng);
        const Stage1Result fit = run_stage1(synth.data, config.sampler, fit_rng);
        for (int t = 0; t < synth.data.num_platforms(); ++t)
            res.kappa.push_back(column_accuracy(fit.column_ls[t], synth.truth.column_alloc[t]));
        res.theta = row_accuracy(fit.row_ls, synth.truth.row_alloc);
        res.r2 = fit_r2(synth.data, fit.point_state(), fit.point_latents()).per_platform;
    } catch (const std::exception& e) {
        res.error = e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

std::vector<ReplicateResult> run_replication_study(const ReplicationConfig& config, std::uint64_t seed) {
    if (config.h_values.empty() || config.sigma_values.empty() || config.replicates < 1)
        throw ConfigError("replication study: empty grid");
    struct Job {
        int h;
        double sigma;
        int replicate;
    };
    std::vector<Job> jobs;
    for (int h : config.h_values)
        for (double s : config.sigma_values)
            for (int r = 0; r < config.replicates; ++r)
                jobs.push_back({h, s, r});
    std::vector<ReplicateResult> results(jobs.size());
    std::size_t next = 0;
    std::mutex mutex;
    auto worker = [&] {
        for (;;) {
            std::size_t k;
            {
                std::lock_guard lock(mutex);
                if (next == jobs.size())
                    return;
                k = next++;
            }
            results[k] = run_replicate(config, jobs[k].h, jobs[k].sigma, jobs[k].replicate, seed);
        }
    };
    const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(jobs.size())));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < threads; ++i)
            pool.emplace_back(worker);
    }
    return results;
}

void write_replication_csv(std::ostream& out, const std::vector<ReplicateResult>& results, bool with_seconds) {
    std::size_t T = 0;
    for (const auto& r : results)
        T = std::max(T, r.kappa.size());
    out << "setup_h,setup_sigma,replicate";
    for (std::size_t t = 0; t < T; ++t)
        out << ",kappa_" << t + 1;
    out << ",theta";
    for (std::size_t t = 0; t < T; ++t)
        out << ",r2_" << t + 1;
    if (with_seconds)
        out << ",seconds";
    out << ",error\n";
    const double na = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : results) {
        out << r.setup_h << ',' << format_double(r.setup_sigma) << ',' << r.replicate + 1;
        for (std::size_t t = 0; t < T; ++t)
            out << ',' << format_double(t < r.kappa.size() ? r.kappa[t] : na);
        out << ',' << format_double(r.error ? na : r.theta);
        for (std::size_t t = 0; t < T; ++t)
            out << ',' << format_double(t < r.r2.size() ? r.r2[t] : na);
        if (with_seconds)
            out << ',' << format_double(r.seconds);
        out << ',';
        if (r.error) {
            std::string msg = *r.error;
            std::replace(msg.begin(), msg.end(), '"', '\'');
            out << '"' << msg << '"';
        }
        out << '\n';
    }
}

namespace {

void mean_sd(const std::vector<double>& x, double& mean, double& sd) {
    const double n = static_cast<double>(x.size());
    mean = n > 0 ? std::accumulate(x.begin(), x.end(), 0.0) / n : std::numeric_limits<double>::quiet_NaN();
    double ss = 0.0;
    for (double v : x)
        ss += (v - mean) * (v - mean);
    sd = n > 1 ? std::sqrt(ss / (n - 1)) : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

std::vector<SetupSummary> summarize(const std::vector<ReplicateResult>& results) {
    std::map<std::pair<int, double>, std::vector<const ReplicateResult*>> cells;
    std::vector<std::pair<int, double>> order;
    for (const auto& r : results) {
        const auto key = std::make_pair(r.setup_h, r.setup_sigma);
        if (!cells.count(key))
            order.push_back(key);
        if (!r.error)
            cells[key].push_back(&r);
        else
            cells[key];
    }
    std::vector<SetupSummary> out;
    for (const auto& key : order) {
        const auto& rs = cells[key];
        SetupSummary s;
        s.setup_h = key.first;
        s.setup_sigma = key.second;
        s.count = static_cast<int>(rs.size());
        const std::size_t T = rs.empty() ? 0 : rs.front()->kappa.size();
        s.kappa_mean.resize(T);
        s.kappa_sd.resize(T);
        s.r2_mean.resize(T);
        s.r2_sd.resize(T);
        for (std::size_t t = 0; t < T; ++t) {
            std::vector<double> k, r2;
            for (const auto* r : rs) {
                k.push_back(r->kappa[t]);
                r2.push_back(r->r2[t]);
            }
            mean_sd(k, s.kappa_mean[t], s.kappa_sd[t]);
            mean_sd(r2, s.r2_mean[t], s.r2_sd[t]);
        }
        std::vector<double> th;
        for (const auto* r : rs)
            th.push_back(r->theta);
        mean_sd(th, s.theta_mean, s.theta_sd);
        out.push_back(std::move(s));
    }
    return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SetupSummary>& summary) {
    std::size_t T = 0;
    for (const auto& s : summary)
        T = std::max(T, s.kappa_mean.size());
    out << "setup_h,setup_sigma,replicates";
    for (std::size_t t = 0; t < T; ++t)
        out << ",kappa_" << t + 1 << "_mean,kappa_" << t + 1 << "_sd";
    out << ",theta_mean,theta_sd";
    for (std::size_t t = 0; t < T; ++t)
        out << ",r2_" << t + 1 << "_mean,r2_" << t + 1 << "_sd";
    out << '\n';
    const double na = std::numeric_limits<double>::quiet_NaN();
    for (const auto& s : summary) {
        out << s.setup_h << ',' << format_double(s.setup_sigma) << ',' << s.count;
        for (std::size_t t = 0; t < T; ++t)
            out << ',' << format_double(t < s.kappa_mean.size() ? s.kappa_mean[t] : na) << ','
                << format_double(t < s.kappa_sd.size() ? s.kappa_sd[t] : na);
        out << ',' << format_double(s.theta_mean) << ',' << format_double(s.theta_sd);
        for (std::size_t t = 0; t < T; ++t)
            out << ',' << format_double(t < s.r2_mean.size() ? s.r2_mean[t] : na) << ','
                << format_double(t < s.r2_sd.size() ? s.r2_sd[t] : na);
        out << '\n';
    }
}

} // namespace mobnp
