#include "doctest.h"
#include "support.hpp"

#include "mobnp/core_model.hpp"
#include "mobnp/random.hpp"

using namespace mobnp;
using mobnp::testing::dataset_of;
using mobnp::testing::normal_log_density;

namespace {

double brute_force_ll(const TransformedDataset& data, const ClusterState& s, const LatentMatrices& l) {
    double total = 0.0;
    for (int t = 0; t < data.num_platforms(); ++t)
        for (int i = 0; i < data.n(); ++i)
            for (int j = 0; j < data.platforms[t].p(); ++j)
                total += normal_log_density(data.platforms[t].values(i, j),
                                            l.phi[t](s.row_alloc[i], s.column_alloc[t][j]), l.sigma(t));
    return total;
}

MatrixXd random_matrix(int rows, int cols, Rng& rng) {
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            m(i, j) = rng.normal();
    return m;
}

} // namespace

TEST_CASE("identity transform leaves the matrix unchanged") {
    Rng rng(1);
    const MatrixXd raw = random_matrix(4, 3, rng);
    CHECK(transform_platform(raw, Transform::identity) == raw);
}

TEST_CASE("logit values") {
    MatrixXd raw(1, 2);
    raw << 0.5, 0.25;
    const MatrixXd z = transform_platform(raw, Transform::logit);
    CHECK(z(0, 0) == 0.0);
    CHECK(z(0, 1) == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-15));
    CHECK(z(0, 1) == doctest::Approx(-1.0986122886681098));
}

TEST_CASE("logit outside (0,1) is a domain error naming the cell") {
    MatrixXd raw(2, 2);
    raw << 0.2, 0.3, 0.4, 1.0;
    try {
        (void)transform_platform(raw, Transform::logit);
        FAIL("expected a domain error");
    } catch (const DomainError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("column 2") != std::string::npos);
    }
    raw(1, 1) = 0.0;
    CHECK_THROWS_AS((void)transform_platform(raw, Transform::logit), DomainError);
}

TEST_CASE("logit round trip recovers proportions") {
    Rng rng(2);
    MatrixXd raw(20, 10);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 10; ++j)
            raw(i, j) = 1e-6 + (1 - 2e-6) * rng.uniform();
    const MatrixXd z = transform_platform(raw, Transform::logit);
    for (int i = 0; i < 20; ++i)
        for (int j = 0; j < 10; ++j)
            CHECK(std::abs(inverse_logit(z(i, j)) - raw(i, j)) <= 1e-12 * raw(i, j));
}

TEST_CASE("clipping makes boundary proportions transformable") {
    MatrixXd raw(1, 3);
    raw << 0.0, 0.5, 1.0;
    const MatrixXd z = transform_platform(clip_proportions(raw, 1e-3), Transform::logit);
    CHECK(z(0, 0) == doctest::Approx(logit(1e-3)));
    CHECK(z(0, 2) == doctest::Approx(-logit(1e-3)));
}

TEST_CASE("cell log-likelihood") {
    const double mode = cell_log_likelihood(0.7, 0.7, 1.0);
    CHECK(mode == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
    CHECK(mode == doctest::Approx(-0.918938533204672742));
    CHECK(cell_log_likelihood(0.7 + 2.5, 0.7, 2.5) == doctest::Approx(cell_log_likelihood(0.7, 0.7, 2.5) - 0.5));
    CHECK(cell_log_likelihood(1.3, 0.5, 0.2) == doctest::Approx(normal_log_density(1.3, 0.5, 0.2)).epsilon(1e-14));
    CHECK_THROWS_AS((void)cell_log_likelihood(std::nan(""), 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS((void)cell_log_likelihood(0.0, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS((void)cell_log_likelihood(0.0, std::numeric_limits<double>::infinity(), 1.0), std::invalid_argument);
}

TEST_CASE("dataset log-likelihood") {
    SUBCASE("1x1 data is one cell") {
        MatrixXd z(1, 1);
        z << 0.3;
        TransformedDataset data = dataset_of({z});
        ClusterState s{{{0}}, {0}};
        LatentMatrices l;
        l.phi = {MatrixXd::Constant(1, 1, -0.2)};
        l.atom_ids = {MatrixXi::Zero(1, 1)};
        l.sigma = VectorXd::Constant(1, 0.7);
        CHECK(dataset_log_likelihood(data, s, l) == doctest::Approx(cell_log_likelihood(0.3, -0.2, 0.7)));
    }
    SUBCASE("random instance matches a triple loop; platforms add") {
        Rng rng(3);
        TransformedDataset data = dataset_of({random_matrix(3, 4, rng), random_matrix(3, 2, rng)});
        ClusterState s{{{0, 1, 0, 2}, {0, 0}}, {0, 1, 1}};
        LatentMatrices l;
        l.phi = {random_matrix(2, 3, rng), random_matrix(2, 1, rng)};
        l.atom_ids = {MatrixXi::Zero(2, 3), MatrixXi::Zero(2, 1)};
        l.sigma = VectorXd::Constant(2, 0.8);
        const double both = dataset_log_likelihood(data, s, l);
        CHECK(both == doctest::Approx(brute_force_ll(data, s, l)).epsilon(1e-13));

        TransformedDataset first = dataset_of({data.platforms[0].values});
        TransformedDataset second = dataset_of({data.platforms[1].values});
        LatentMatrices l1 = l, l2 = l;
        l1.phi = {l.phi[0]};
        l1.sigma = VectorXd::Constant(1, 0.8);
        l2.phi = {l.phi[1]};
        l2.sigma = VectorXd::Constant(1, 0.8);
        const double sum = dataset_log_likelihood(first, {{s.column_alloc[0]}, s.row_alloc}, l1) +
                           dataset_log_likelihood(second, {{s.column_alloc[1]}, s.row_alloc}, l2);
        CHECK(both == doctest::Approx(sum).epsilon(1e-13));
    }
    SUBCASE("dimension mismatch is structural") {
        Rng rng(4);
        TransformedDataset data = dataset_of({random_matrix(3, 4, rng)});
        ClusterState s{{{0, 1, 0}}, {0, 1, 1}};
        LatentMatrices l;
        l.phi = {random_matrix(2, 2, rng)};
        l.atom_ids = {MatrixXi::Zero(2, 2)};
        l.sigma = VectorXd::Constant(1, 1.0);
        CHECK_THROWS_AS((void)dataset_log_likelihood(data, s, l), StructuralError);
    }
}

TEST_CASE("dataset log-likelihood is invariant to relabelling with permuted latent matrices") {
    Rng rng(5);
    TransformedDataset data = dataset_of({random_matrix(5, 6, rng)});
    ClusterState s{{{0, 1, 2, 0, 1, 2}}, {0, 1, 0, 1, 1}};
    LatentMatrices l;
    l.phi = {random_matrix(2, 3, rng)};
    l.atom_ids = {MatrixXi::Zero(2, 3)};
    l.sigma = VectorXd::Constant(1, 0.6);
    const double before = dataset_log_likelihood(data, s, l);
    // Column labels 0,1,2 -> 2,0,1 and row labels swapped.
    const std::vector<int> col_map = {2, 0, 1};
    ClusterState relabelled = s;
    for (int& c : relabelled.column_alloc[0])
        c = col_map[c];
    for (int& r : relabelled.row_alloc)
        r = 1 - r;
    LatentMatrices permuted = l;
    for (int k = 0; k < 3; ++k)
        for (int h = 0; h < 2; ++h)
            permuted.phi[0](1 - h, col_map[k]) = l.phi[0](h, k);
    CHECK(dataset_log_likelihood(data, relabelled, permuted) == doctest::Approx(before).epsilon(1e-13));
}

TEST_CASE("moving a latent cell away from its block mean lowers the likelihood") {
    Rng rng(6);
    TransformedDataset data = dataset_of({random_matrix(4, 4, rng)});
    ClusterState s{{{0, 0, 1, 1}}, {0, 0, 1, 1}};
    LatentMatrices l;
    l.phi = {MatrixXd(2, 2)};
    l.atom_ids = {MatrixXi::Zero(2, 2)};
    l.sigma = VectorXd::Constant(1, 0.5);
    for (int h = 0; h < 2; ++h)
        for (int k = 0; k < 2; ++k)
            l.phi[0](h, k) = data.platforms[0].values.block(2 * h, 2 * k, 2, 2).mean();
    const double best = dataset_log_likelihood(data, s, l);
    for (int h = 0; h < 2; ++h)
        for (int k = 0; k < 2; ++k)
            for (double delta : {-0.3, -1e-3, 1e-3, 0.3}) {
                LatentMatrices moved = l;
                moved.phi[0](h, k) += delta;
                CHECK(dataset_log_likelihood(data, s, moved) < best);
            }
}

TEST_CASE("cluster state validation") {
    ClusterState ok{{{0, 1, 0}}, {0, 0, 1}};
    CHECK_NOTHROW(ok.validate());
    CHECK(ok.K(0) == 2);
    CHECK(ok.H() == 2);
    ClusterState gap{{{0, 2, 0}}, {0, 0, 1}};
    CHECK_THROWS_AS(gap.validate(), StructuralError);
    ClusterState order{{{1, 0, 0}}, {0, 0, 1}};
    CHECK_THROWS_AS(order.validate(), StructuralError);
}

TEST_CASE("clinical outcomes") {
    VectorXd time(3);
    time << 2.0, 5.0, 1.5;
    const auto c = ClinicalOutcomes::from_times(time, {1, 0, 1});
    CHECK(c.log_time(0) == std::log(2.0));
    CHECK(c.log_time(1) == std::log(5.0));
    VectorXd bad = time;
    bad(2) = 0.0;
    CHECK_THROWS_AS((void)ClinicalOutcomes::from_times(bad, {1, 0, 1}), DomainError);
    CHECK_THROWS_AS((void)ClinicalOutcomes::from_times(time, {1, 2, 1}), DomainError);
    ClinicalOutcomes lowered = c;
    lowered.log_time(1) = std::log(5.0) - 0.1;
    CHECK_THROWS_AS(lowered.validate(), StructuralError);
}

TEST_CASE("dataset validation") {
    Rng rng(7);
    TransformedDataset data = dataset_of({random_matrix(3, 2, rng), random_matrix(3, 4, rng)});
    CHECK_NOTHROW(data.validate());
    data.platforms[1].patient_ids[2] = "other";
    CHECK_THROWS(data.validate());
    TransformedDataset one_row = dataset_of({random_matrix(1, 2, rng)});
    CHECK_THROWS(one_row.validate());
    TransformedDataset nonfinite = dataset_of({random_matrix(3, 2, rng)});
    nonfinite.platforms[0].values(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(nonfinite.validate());
}

TEST_CASE("hyperparameter validation") {
    Hyperparameters hp;
    CHECK_NOTHROW(hp.validate());
    hp.alpha3 = 0.0;
    CHECK_THROWS(hp.validate());
    hp = {};
    hp.discount = {0.2, 1.0};
    CHECK_THROWS(hp.validate());
    hp = {};
    hp.tau0 = -1.0;
    CHECK_THROWS(hp.validate());
}
