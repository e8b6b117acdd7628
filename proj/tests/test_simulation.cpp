#include "doctest.h"
#include "support.hpp"

#include "mobnp/errors.hpp"
#include "mobnp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace mobnp;

namespace {

Allocation relabel(const Allocation& a, Rng& rng) {
    const int K = num_clusters(a);
    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = K - 1; k > 0; --k)
        std::swap(perm[k], perm[rng.uniform_int(k + 1)]);
    Allocation out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = perm[a[i]] + 7;
    return out;
}

Allocation random_alloc(int n, int K, Rng& rng) {
    Allocation a(n);
    for (int& v : a)
        v = rng.uniform_int(K);
    return a;
}

} // namespace

TEST_CASE("default generator shapes") {
    Rng rng(1);
    const SyntheticData sd = generate_synthetic(SimulationConfig{}, rng);
    REQUIRE(sd.data.num_platforms() == 2);
    for (int t = 0; t < 2; ++t) {
        CHECK(sd.data.platforms[t].n() == 70);
        CHECK(sd.data.platforms[t].p() == 250);
        const int K = num_clusters(sd.truth.column_alloc[t]);
        CHECK(K >= 1);
        CHECK(K <= 250);
        CHECK(sd.truth.phi[t].cols() == K);
        CHECK(sd.truth.phi[t].rows() == num_clusters(sd.truth.row_alloc));
    }
    sd.data.validate();
    CHECK(is_canonical(sd.truth.row_alloc));
}

TEST_CASE("noiseless data equal their latent patterns") {
    SimulationConfig config;
    config.sigma = 0.0;
    config.n = 20;
    config.p = {30, 40};
    Rng rng(2);
    const SyntheticData sd = generate_synthetic(config, rng);
    for (int t = 0; t < 2; ++t)
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < config.p[t]; ++j)
                CHECK(sd.data.platforms[t].values(i, j) ==
                      sd.truth.phi[t](sd.truth.row_alloc[i], sd.truth.column_alloc[t][j]));
    ClusterState exact{sd.truth.column_alloc, sd.truth.row_alloc};
    LatentMatrices latents{sd.truth.phi, {}, VectorXd::Constant(2, 1.0)};
    CHECK(fit_r2(sd.data, exact, latents).pooled == 1.0);
    CHECK(column_accuracy(sd.truth.column_alloc[0], sd.truth.column_alloc[0]) == 1.0);
    CHECK(row_accuracy(sd.truth.row_alloc, sd.truth.row_alloc) == 1.0);
}

TEST_CASE("row categories are equiprobable") {
    SimulationConfig config;
    config.p = {5};
    config.discount = {0.2};
    Rng rng(3);
    const int draws = 200;
    std::vector<double> prop(3, 0.0);
    for (int d = 0; d < draws; ++d) {
        // Category proportions from the raw draw; canonical relabelling would bias them.
        Rng sub = rng.split(static_cast<std::uint64_t>(d));
        std::vector<int> counts(3, 0);
        for (int i = 0; i < config.n; ++i)
            ++counts[sub.uniform_int(3)];
        Rng same = rng.split(static_cast<std::uint64_t>(d));
        const SyntheticData sd = generate_synthetic(config, same);
        // The generator consumes the stream the same way, so its partition matches the counts.
        std::vector<int> sizes = cluster_sizes(sd.truth.row_alloc);
        std::vector<int> sorted_counts;
        for (int c : counts)
            if (c > 0)
                sorted_counts.push_back(c);
        std::sort(sizes.begin(), sizes.end());
        std::sort(sorted_counts.begin(), sorted_counts.end());
        CHECK(sizes == sorted_counts);
        for (int h = 0; h < 3; ++h)
            prop[h] += static_cast<double>(counts[h]) / config.n / draws;
    }
    const double mc_sd = std::sqrt((1.0 / 3) * (2.0 / 3) / config.n / draws);
    for (double p : prop)
        CHECK(std::abs(p - 1.0 / 3) < 3.0 * mc_sd);
}

TEST_CASE("cluster count of generated partitions at zero discount") {
    SimulationConfig config;
    config.n = 2;
    config.p = {250};
    config.discount = {0.0};
    config.truncation = 50;
    Rng rng(4);
    const int draws = 200;
    double total = 0.0;
    for (int d = 0; d < draws; ++d)
        total += num_clusters(generate_synthetic(config, rng).truth.column_alloc[0]);
    const double mean = total / draws;
    double exact = 0.0, var = 0.0;
    for (int i = 0; i < 250; ++i) {
        const double q = config.alpha1 / (config.alpha1 + i);
        exact += q;
        var += q * (1.0 - q);
    }
    CHECK(std::abs(mean - exact) < 3.0 * std::sqrt(var / draws));
    // The usual large-p approximation alpha log(1 + p / alpha).
    CHECK(mean == doctest::Approx(config.alpha1 * std::log1p(250 / config.alpha1)).epsilon(0.15));
}

TEST_CASE("generator is reproducible and sigma only scales the noise") {
    SimulationConfig config;
    config.n = 15;
    config.p = {20, 25};
    Rng a(5), b(5);
    const SyntheticData x = generate_synthetic(config, a);
    const SyntheticData y = generate_synthetic(config, b);
    CHECK(x.data.platforms[1].values == y.data.platforms[1].values);
    CHECK(x.truth.column_alloc == y.truth.column_alloc);

    config.sigma = 0.4;
    Rng c(5);
    const SyntheticData z = generate_synthetic(config, c);
    CHECK(z.truth.column_alloc == x.truth.column_alloc);
    CHECK(z.truth.phi[0] == x.truth.phi[0]);
    for (int t = 0; t < 2; ++t)
        for (int i = 0; i < 15; ++i)
            for (int j = 0; j < config.p[t]; ++j) {
                const double phi = x.truth.phi[t](x.truth.row_alloc[i], x.truth.column_alloc[t][j]);
                CHECK((z.data.platforms[t].values(i, j) - phi) ==
                      doctest::Approx(2.0 * (x.data.platforms[t].values(i, j) - phi)).epsilon(1e-9));
            }
}

TEST_CASE("accuracy examples") {
    CHECK(column_accuracy({0, 0, 1, 1}, {0, 0, 0, 1}) == 0.5);
    CHECK(row_accuracy({1, 1, 0, 0}, {0, 0, 1, 1}) == 1.0);
    CHECK(row_accuracy({0, 0, 0, 1}, {0, 0, 1, 1}) == 0.5);
    CHECK(column_accuracy({0, 1, 2, 3, 4}, {0, 0, 0, 0, 0}) == 0.0);
    const double two = row_accuracy({0, 1}, {0, 0});
    CHECK((two == 0.0 || two == 1.0));
    CHECK_THROWS_AS(column_accuracy({0}, {0}), std::invalid_argument);
    CHECK_THROWS_AS(column_accuracy({0, 1}, {0, 1, 1}), std::invalid_argument);
}

TEST_CASE("accuracy is relabelling invariant and symmetric") {
    Rng rng(6);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = 2 + rng.uniform_int(30);
        const Allocation a = random_alloc(n, 1 + rng.uniform_int(5), rng);
        const Allocation b = random_alloc(n, 1 + rng.uniform_int(5), rng);
        const double base = pair_agreement(a, b);
        CHECK(pair_agreement(relabel(a, rng), relabel(b, rng)) == base);
        CHECK(pair_agreement(b, a) == base);
        CHECK(base >= 0.0);
        CHECK(base <= 1.0);
    }
}

TEST_CASE("fit R2 examples") {
    MatrixXd Z(2, 2);
    Z << 1, 2, 3, 6;
    const auto data = testing::dataset_of({Z});
    ClusterState cells{{{0, 1}}, {0, 1}};
    LatentMatrices perfect{{Z}, {}, VectorXd::Ones(1)};
    CHECK(fit_r2(data, cells, perfect).pooled == 1.0);
    ClusterState one{{{0, 0}}, {0, 0}};
    LatentMatrices grand{{MatrixXd::Constant(1, 1, 3.0)}, {}, VectorXd::Ones(1)};
    CHECK(fit_r2(data, one, grand).pooled == 0.0);
    const auto flat = testing::dataset_of({MatrixXd::Constant(2, 2, 1.0)});
    LatentMatrices ones{{MatrixXd::Constant(1, 1, 1.0)}, {}, VectorXd::Ones(1)};
    CHECK(std::isnan(fit_r2(flat, one, ones).pooled));
}

TEST_CASE("survival generator") {
    SimulationConfig config;
    config.n = 60;
    config.p = {120};
    config.discount = {0.2};
    Rng rng(8);
    const SyntheticData sd = generate_synthetic(config, rng);
    const SurvivalTruth st = generate_survival(sd.data, SurvivalConfig{}, rng);
    st.outcomes.validate();
    CHECK(st.outcomes.n() == 60);
    CHECK(static_cast<int>(st.predictors.size()) <= 20);
    CHECK(st.coefficients.size() == static_cast<Eigen::Index>(st.predictors.size()));
    const int censored = static_cast<int>(std::count(st.outcomes.event.begin(), st.outcomes.event.end(), 0));
    CHECK(censored > 0);
    CHECK(censored < 30);
}

TEST_CASE("replicate results and CSV layout") {
    ReplicationConfig config;
    config.base.n = 12;
    config.base.p = {15, 15};
    config.sampler.schedule = {.sweeps_1a = 10, .sweeps_1b = 6, .sweeps_1c = 6, .burn_in_fraction = 0.5, .thin = 1};
    config.h_values = {2, 3};
    config.sigma_values = {0.2, 0.5};
    config.replicates = 2;
    const auto results = run_replication_study(config, 77);
    CHECK(results.size() == 8);
    for (const auto& r : results) {
        CHECK_FALSE(r.error.has_value());
        CHECK(r.kappa.size() == 2);
        CHECK(r.theta >= 0.0);
        CHECK(r.theta <= 1.0);
    }
    const auto again = run_replication_study(config, 77);
    std::ostringstream a, b;
    write_replication_csv(a, results, false);
    write_replication_csv(b, again, false);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("setup_h,setup_sigma,replicate,kappa_1,kappa_2,theta,r2_1,r2_2", 0) == 0);

    const auto summary = summarize(results);
    CHECK(summary.size() == 4);
    for (const auto& s : summary)
        CHECK(s.count == 2);
}

TEST_CASE("invalid generator settings are config errors") {
    SimulationConfig config;
    config.discount = {0.2};
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config = SimulationConfig{};
    config.n = 1;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}
