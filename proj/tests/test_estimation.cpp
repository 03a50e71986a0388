#include <acscp/estimation.hpp>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"

#include <random>

using acscp::Belief;
using acscp::GridWorld;
using acscp::MeasurementModel;
using acscp::ThreatDynamics;

TEST_CASE("initial belief", "[estimation]") {
    Belief bel = acscp::init_belief(49, 1000.0);
    CHECK(bel.mean.norm() == 0.0);
    CHECK((bel.cov - 1000.0 * Eigen::MatrixXd::Identity(49, 49)).norm() == 0.0);
    CHECK(bel.cov.trace() == Catch::Approx(49.0 * 1000.0));
    CHECK(bel.step == 0);

    Belief scalar = acscp::init_belief(1, 1.0);
    CHECK(scalar.mean.size() == 1);
    CHECK(scalar.cov(0, 0) == 1.0);

    CHECK_THROWS_AS(acscp::init_belief(3, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(acscp::init_belief(0, 1.0), std::invalid_argument);
}

TEST_CASE("measurement model construction", "[estimation]") {
    GridWorld g(1.0, 5);
    acscp::Scenario scen = acscp::make_default_scenario(9, 3);

    MeasurementModel m = acscp::build_measurement_model(scen.basis, g, {3, 17}, 0.1);
    REQUIRE(m.H.rows() == 2);
    REQUIRE(m.H.cols() == 9);
    CHECK((m.R - 0.1 * 0.1 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    // Rows are exactly the basis vectors at the configured vertices.
    CHECK((m.H.row(0).transpose() - acscp::basis_vector(scen.basis, g.coord(3)))
              .norm() == 0.0);
    CHECK((m.H.row(1).transpose() - acscp::basis_vector(scen.basis, g.coord(17)))
              .norm() == 0.0);

    // A sensor sitting on a basis center reads that basis at full strength.
    const acscp::VertexId center_vertex = g.nearest_vertex(scen.basis.centers[4]);
    REQUIRE((g.coord(center_vertex) - scen.basis.centers[4]).norm() < 1e-12);
    MeasurementModel on_center =
        acscp::build_measurement_model(scen.basis, g, {center_vertex}, 0.1);
    CHECK(on_center.H(0, 4) == Catch::Approx(1.0));

    CHECK_THROWS_AS(acscp::build_measurement_model(scen.basis, g, {}, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(acscp::build_measurement_model(scen.basis, g, {3, 3}, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(acscp::build_measurement_model(scen.basis, g, {0}, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(acscp::build_measurement_model(scen.basis, g, {3}, 0.0),
                    std::invalid_argument);
}

TEST_CASE("predict propagation", "[estimation]") {
    Belief bel = acscp::init_belief(3, 1.0);
    bel.mean = Eigen::VectorXd::Constant(3, 2.0);

    ThreatDynamics dyn;
    dyn.a_matrix = Eigen::MatrixXd::Identity(3, 3);
    dyn.process_noise = 0.0;

    Belief same = acscp::predict(bel, dyn, 0);
    CHECK((same.mean - bel.mean).norm() == 0.0);
    CHECK(same.step == 0);

    Belief still = acscp::predict(bel, dyn, 7);
    CHECK((still.cov - bel.cov).norm() == 0.0);
    CHECK(still.step == 7);

    dyn.a_matrix = 0.5 * Eigen::MatrixXd::Identity(3, 3);
    Belief shrunk = acscp::predict(bel, dyn, 2);
    CHECK((shrunk.cov - 0.0625 * Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-15);
    CHECK((shrunk.mean - Eigen::VectorXd::Constant(3, 0.5)).norm() < 1e-15);

    dyn.process_noise = 0.1;
    Belief noisy = acscp::predict(bel, dyn, 1);
    CHECK(noisy.cov(0, 0) == Catch::Approx(0.25 + 0.1));

    CHECK_THROWS_AS(acscp::predict(bel, dyn, -1), std::invalid_argument);
}

TEST_CASE("scalar update closed form", "[estimation]") {
    Belief bel = acscp::init_belief(1, 1.0);
    MeasurementModel m;
    m.H = Eigen::MatrixXd::Ones(1, 1);
    m.R = Eigen::MatrixXd::Ones(1, 1);

    Belief post = acscp::update(bel, m, Eigen::VectorXd::Constant(1, 2.0));
    CHECK(post.mean[0] == Catch::Approx(1.0));
    CHECK(post.cov(0, 0) == Catch::Approx(0.5));

    // H = 0 leaves the belief unchanged.
    m.H = Eigen::MatrixXd::Zero(1, 1);
    Belief unchanged = acscp::update(bel, m, Eigen::VectorXd::Constant(1, 5.0));
    CHECK(unchanged.mean[0] == Catch::Approx(0.0));
    CHECK(unchanged.cov(0, 0) == Catch::Approx(1.0));
}

TEST_CASE("update matches normal equations", "[estimation]") {
    std::mt19937_64 rng(2024);
    GridWorld g(1.0, 4);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 3);
        const int n_params = n * n;
        acscp::Scenario scen = acscp::make_default_scenario(n_params, rng());

        Belief bel;
        bel.mean = oracles::random_vector(n_params, rng, -2.0, 2.0);
        bel.cov = oracles::random_psd(n_params, rng) +
                  0.1 * Eigen::MatrixXd::Identity(n_params, n_params);

        const int rows = 1 + static_cast<int>(rng() % 3);
        std::vector<acscp::VertexId> config;
        while (static_cast<int>(config.size()) < rows) {
            acscp::VertexId v = 1 + static_cast<int>(rng() % g.num_vertices());
            if (std::find(config.begin(), config.end(), v) == config.end())
                config.push_back(v);
        }
        MeasurementModel m =
            acscp::build_measurement_model(scen.basis, g, config, 0.3);
        const Eigen::VectorXd z = oracles::random_vector(rows, rng, -1.0, 3.0);

        Belief post = acscp::update(bel, m, z);
        oracles::NormalEqPosterior ref =
            oracles::normal_equations_update(bel.mean, bel.cov, m.H, m.R, z);

        CHECK((post.mean - ref.mean).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK((post.cov - ref.cov).lpNorm<Eigen::Infinity>() < 1e-8);
    }
}

TEST_CASE("update keeps covariance symmetric and PSD under fuzzing", "[estimation]") {
    std::mt19937_64 rng(77);
    GridWorld g(1.0, 6);
    acscp::Scenario scen = acscp::make_default_scenario(16, 5);

    Belief bel = acscp::init_belief(16, 1000.0);
    ThreatDynamics dyn;
    dyn.a_matrix = 0.999 * Eigen::MatrixXd::Identity(16, 16);
    dyn.process_noise = 1e-4;

    double prev_trace = bel.cov.trace();
    for (int k = 0; k < 500; ++k) {
        const acscp::VertexId v = 1 + static_cast<int>(rng() % g.num_vertices());
        MeasurementModel m = acscp::build_measurement_model(scen.basis, g, {v}, 0.05);
        const Eigen::VectorXd z = oracles::random_vector(1, rng, -0.5, 4.0);

        acscp::UpdateDiagnostics diag;
        Belief post = acscp::update(bel, m, z, &diag);
        CHECK((post.cov - post.cov.transpose()).lpNorm<Eigen::Infinity>() < 1e-10);
        CHECK(diag.min_eig_before_clamp >= -1e-8);
        CHECK(post.cov.trace() <= prev_trace + 1e-9);

        bel = acscp::predict(post, dyn, 1);
        prev_trace = bel.cov.trace();
    }
}

TEST_CASE("update input validation", "[estimation]") {
    Belief bel = acscp::init_belief(2, 1.0);
    MeasurementModel m;
    m.H = Eigen::MatrixXd::Ones(1, 3);
    m.R = Eigen::MatrixXd::Ones(1, 1);
    CHECK_THROWS_AS(acscp::update(bel, m, Eigen::VectorXd::Zero(1)),
                    std::invalid_argument);
    m.H = Eigen::MatrixXd::Ones(1, 2);
    CHECK_THROWS_AS(acscp::update(bel, m, Eigen::VectorXd::Zero(2)),
                    std::invalid_argument);
}
