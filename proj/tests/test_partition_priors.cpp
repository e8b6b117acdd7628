#include "doctest.h"
#include "support.hpp"

#include "mobnp/errors.hpp"
#include "mobnp/partition_priors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

using namespace mobnp;

namespace {

/// Product of predictive steps, written against the rule itself rather than the library.
double sequential_oracle(const Allocation& alloc, double d, double alpha) {
    std::vector<int> sizes;
    double lp = 0.0;
    for (std::size_t i = 0; i < alloc.size(); ++i) {
        const int K = static_cast<int>(sizes.size());
        const double denom = alpha + static_cast<double>(i);
        if (alloc[i] == K) {
            lp += std::log((alpha + K * d) / denom);
            sizes.push_back(1);
        } else {
            lp += std::log((sizes[alloc[i]] - d) / denom);
            ++sizes[alloc[i]];
        }
    }
    return lp;
}

/// Canonical allocation of the same set partition under an item reordering.
Allocation reorder(const Allocation& alloc, const std::vector<int>& order) {
    Allocation out(alloc.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        out[i] = alloc[order[i]];
    return canonicalize(out);
}

} // namespace

TEST_CASE("predictive rule examples") {
    const auto empty = pdp_predictive(PartitionCounts{}, 0.3, 2.0);
    REQUIRE(empty.size() == 1);
    CHECK(empty[0] == 1.0);

    const auto crp = pdp_predictive(PartitionCounts({3, 2}), 0.0, 1.0);
    CHECK(crp[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(crp[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(crp[2] == doctest::Approx(1.0 / 6).epsilon(1e-15));

    const auto pdp = pdp_predictive(PartitionCounts({3, 2}), 0.5, 1.0);
    CHECK(pdp[0] == doctest::Approx(2.5 / 6).epsilon(1e-15));
    CHECK(pdp[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(pdp[2] == doctest::Approx(2.0 / 6).epsilon(1e-15));
}

TEST_CASE("predictive rule sums to one") {
    Rng rng(11);
    for (int rep = 0; rep < 2000; ++rep) {
        std::vector<int> sizes(1 + rng.uniform_int(12));
        for (int& s : sizes)
            s = 1 + rng.uniform_int(50);
        const double d = rng.bernoulli(0.3) ? 0.0 : rng.uniform() * 0.999;
        const double alpha = 0.01 + 20.0 * rng.uniform();
        const auto p = pdp_predictive(PartitionCounts(sizes), d, alpha);
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
    }
}

TEST_CASE("zero discount is exactly the Chinese restaurant rule") {
    Rng rng(12);
    for (int rep = 0; rep < 500; ++rep) {
        std::vector<int> sizes(1 + rng.uniform_int(8));
        for (int& s : sizes)
            s = 1 + rng.uniform_int(30);
        const double alpha = 0.1 + 10.0 * rng.uniform();
        const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
        const auto p = pdp_predictive(PartitionCounts(sizes), 0.0, alpha);
        for (std::size_t k = 0; k < sizes.size(); ++k)
            CHECK(p[k] == sizes[k] / (total + alpha));
        CHECK(p.back() == alpha / (total + alpha));
    }
}

TEST_CASE("sample_partition") {
    Rng rng(13);
    CHECK(sample_partition(1, 0.4, 2.0, rng) == Allocation{0});
    for (int rep = 0; rep < 100; ++rep) {
        const auto a = sample_partition(30, 0.3, 3.0, rng);
        CHECK(is_canonical(a));
        CHECK(a[0] == 0);
    }
}

TEST_CASE("cluster count at p = 10000 matches its exact expectation") {
    // E K = sum_i alpha / (alpha + i), about 69.6 here; alpha log p = 92.1 is only its leading-order growth.
    Rng rng(14);
    const int draws = 200;
    double sum = 0.0, sumsq = 0.0;
    for (int rep = 0; rep < draws; ++rep) {
        const double k = num_clusters(sample_partition(10000, 0.0, 10.0, rng));
        sum += k;
        sumsq += k * k;
    }
    const double mean = sum / draws;
    const double sd = std::sqrt((sumsq / draws - mean * mean) / draws);
    double expected = 0.0;
    for (int i = 0; i < 10000; ++i)
        expected += 10.0 / (10.0 + i);
    CHECK(std::abs(mean - expected) <= 4 * sd);
    CHECK(std::abs(mean - expected) <= 0.15 * expected);
    // Growth is logarithmic: the exact expectation over alpha log p tends to one.
    auto ratio = [](double p) { return std::log1p(p / 10.0) / std::log(p); };
    CHECK(ratio(1e4) < ratio(1e8));
    CHECK(ratio(1e8) < ratio(1e16));
    CHECK(ratio(1e16) > 0.93);
}

TEST_CASE("sampled partitions of four items follow the sequential probabilities") {
    Rng rng(15);
    const int draws = 1000000;
    std::map<Allocation, long> counts;
    for (int i = 0; i < draws; ++i)
        ++counts[sample_partition(4, 0.5, 1.0, rng)];
    const auto all = enumerate_partitions(4);
    CHECK(all.size() == 15);
    for (const auto& a : all) {
        const double p = std::exp(partition_log_prob(a, 0.5, 1.0));
        const double sd = std::sqrt(p * (1 - p) / draws);
        const double freq = static_cast<double>(counts[a]) / draws;
        CHECK(std::abs(freq - p) <= 3 * sd);
    }
}

TEST_CASE("partition_log_prob examples") {
    CHECK(partition_log_prob({0}, 0.3, 2.0) == 0.0);
    CHECK(partition_log_prob({0, 0}, 0.0, 1.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(partition_log_prob({0, 1, 0}, 0.5, 1.0) == doctest::Approx(std::log(0.125)).epsilon(1e-15));
    CHECK_THROWS_AS((void)partition_log_prob({1, 0}, 0.0, 1.0), StructuralError);
    CHECK_THROWS_AS((void)partition_log_prob({0, 2}, 0.0, 1.0), StructuralError);
}

TEST_CASE("partition probability matches the sequential oracle and the closed form") {
    for (int n = 1; n <= 6; ++n)
        for (const auto& a : enumerate_partitions(n))
            for (double d : {0.0, 0.25, 0.7})
                for (double alpha : {0.5, 1.0, 4.0}) {
                    const double lp = partition_log_prob(a, d, alpha);
                    CHECK(lp == doctest::Approx(sequential_oracle(a, d, alpha)).epsilon(1e-12));
                    CHECK(std::abs(pdp_log_eppf(cluster_sizes(a), d, alpha) - lp) <= 1e-10);
                }
}

TEST_CASE("partition probability is exchangeable") {
    for (int n = 1; n <= 6; ++n) {
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        const auto parts = enumerate_partitions(n);
        for (const auto& a : parts)
            for (double d : {0.0, 0.4}) {
                const double ref = partition_log_prob(a, d, 1.5);
                std::vector<int> perm = order;
                do {
                    CHECK(std::abs(partition_log_prob(reorder(a, perm), d, 1.5) - ref) <= 1e-10);
                } while (std::next_permutation(perm.begin(), perm.end()));
            }
    }
}

TEST_CASE("partition probabilities sum to one") {
    for (int n = 1; n <= 5; ++n)
        for (double d : {0.0, 0.3, 0.9})
            for (double alpha : {0.2, 1.0, 7.0}) {
                double total = 0.0;
                for (const auto& a : enumerate_partitions(n))
                    total += std::exp(partition_log_prob(a, d, alpha));
                CHECK(std::abs(total - 1.0) <= 1e-10);
            }
}

TEST_CASE("enumerated partitions are the Bell numbers") {
    const std::vector<std::size_t> bell = {1, 2, 5, 15, 52, 203};
    for (int n = 1; n <= 6; ++n)
        CHECK(enumerate_partitions(n).size() == bell[n - 1]);
}

TEST_CASE("stick breaking") {
    Rng rng(16);
    auto base = [](Rng& r) { return r.normal(); };
    const auto single = stick_breaking(3.0, base, 1, rng);
    REQUIRE(single.weights.size() == 1);
    CHECK(single.weights[0] == 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const auto m = stick_breaking(10.0, base, 2000, rng);
        CHECK(m.atoms.size() == m.weights.size());
        CHECK(std::abs(std::accumulate(m.weights.begin(), m.weights.end(), 0.0) - 1.0) <= 1e-12);
        CHECK(*std::min_element(m.weights.begin(), m.weights.end()) >= 0.0);
    }
}

TEST_CASE("first stick has mean 1/(1+alpha)") {
    Rng rng(17);
    const int draws = 100000;
    double sum = 0.0, sumsq = 0.0;
    auto base = [](Rng&) { return 0.0; };
    for (int i = 0; i < draws; ++i) {
        const double w = stick_breaking(10.0, base, 2000, rng).weights[0];
        sum += w;
        sumsq += w * w;
    }
    const double mean = sum / draws;
    const double sd = std::sqrt((sumsq / draws - mean * mean) / draws);
    CHECK(std::abs(mean - 1.0 / 11.0) <= 3 * sd);
}

TEST_CASE("discount prior draws") {
    Rng rng(18);
    const int draws = 100000;
    int zeros = 0;
    std::vector<double> positive;
    for (int i = 0; i < draws; ++i) {
        const double d = sample_discount(rng);
        CHECK((d >= 0.0 && d < 1.0));
        if (d == 0.0)
            ++zeros;
        else
            positive.push_back(d);
    }
    const double sd = std::sqrt(0.25 / draws);
    CHECK(std::abs(static_cast<double>(zeros) / draws - 0.5) <= 3 * sd);
    // Asymptotic 1% critical value of the one-sample KS statistic.
    CHECK(testing::ks_uniform(positive) <= 1.628 / std::sqrt(static_cast<double>(positive.size())));
}

TEST_CASE("canonical labels") {
    CHECK(canonicalize({5, 5, 2, 7, 2}) == Allocation{0, 0, 1, 2, 1});
    CHECK(is_canonical({0, 1, 0, 2}));
    CHECK_FALSE(is_canonical({0, 2, 1}));
    CHECK(cluster_sizes({0, 1, 0, 2, 0}) == std::vector<int>{3, 1, 1});
    CHECK(num_clusters({0, 1, 0, 2, 0}) == 3);
}
