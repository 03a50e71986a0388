#include <acscp/threat.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using acscp::BasisSet;
using acscp::GridWorld;
using acscp::Scenario;
using acscp::ThreatDynamics;
using acscp::ThreatState;

namespace {

BasisSet single_basis(Eigen::Vector2d center, double width) {
    BasisSet b;
    b.centers.push_back(std::move(center));
    b.widths = Eigen::VectorXd::Constant(1, width);
    return b;
}

}  // namespace

TEST_CASE("basis vector values", "[threat]") {
    BasisSet b = single_basis({0.3, -0.2}, 0.5);
    CHECK(acscp::basis_vector(b, {0.3, -0.2})[0] == Catch::Approx(1.0));

    // At squared distance 2 * width the response drops to exp(-1).
    const double r = std::sqrt(2.0 * 0.5);
    CHECK(acscp::basis_vector(b, {0.3 + r, -0.2})[0] ==
          Catch::Approx(std::exp(-1.0)).epsilon(1e-12));

    BasisSet bad = single_basis({0.0, 0.0}, -1.0);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    BasisSet mismatched;
    mismatched.centers.emplace_back(0.0, 0.0);
    mismatched.widths = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(mismatched.validate(), std::invalid_argument);
}

TEST_CASE("field value and basis matrix", "[threat]") {
    BasisSet b;
    b.centers = {{-0.5, 0.0}, {0.5, 0.0}};
    b.widths = Eigen::VectorXd::Constant(2, 0.25);

    CHECK(acscp::field_value(b, Eigen::VectorXd::Zero(2), {0.1, 0.9}) ==
          Catch::Approx(1.0));
    // theta = e_n puts exactly one unit bump on top of the background.
    Eigen::VectorXd e1 = Eigen::VectorXd::Unit(2, 1);
    CHECK(acscp::field_value(b, e1, {0.5, 0.0}) == Catch::Approx(2.0));

    CHECK_THROWS_AS(acscp::field_value(b, Eigen::VectorXd::Zero(3), {0.0, 0.0}),
                    std::invalid_argument);

    GridWorld g(1.0, 4);
    const Eigen::MatrixXd table = acscp::basis_matrix(b, g);
    REQUIRE(table.rows() == 16);
    REQUIRE(table.cols() == 2);
    for (acscp::VertexId v = 1; v <= 16; ++v) {
        const Eigen::VectorXd phi = acscp::basis_vector(b, g.coord(v));
        CHECK((table.row(v - 1).transpose() - phi).norm() == 0.0);
    }
}

TEST_CASE("grid coverage check", "[threat]") {
    GridWorld g(1.0, 5);
    BasisSet wide = single_basis({0.0, 0.0}, 4.0);
    CHECK(acscp::covers_grid(wide, g));
    BasisSet narrow = single_basis({0.0, 0.0}, 0.01);
    CHECK_FALSE(acscp::covers_grid(narrow, g));
}

TEST_CASE("truth step without noise", "[threat]") {
    std::mt19937_64 rng(7);
    ThreatDynamics d;
    d.a_matrix = Eigen::MatrixXd::Identity(3, 3);
    d.process_noise = 0.0;
    ThreatState s{Eigen::VectorXd::Constant(3, 2.0), 0};

    ThreatState next = acscp::step_truth(d, s, rng);
    CHECK((next.theta - s.theta).norm() == 0.0);
    CHECK(next.step == 1);

    d.a_matrix = 0.5 * Eigen::MatrixXd::Identity(3, 3);
    next = acscp::step_truth(d, s, rng);
    CHECK(next.theta.isApproxToConstant(1.0));
}

TEST_CASE("truth step noise statistics", "[threat]") {
    // Monte Carlo check of the marginal distribution of one component.
    std::mt19937_64 rng(123);
    ThreatDynamics d;
    d.a_matrix = Eigen::MatrixXd::Identity(2, 2);
    d.process_noise = 0.04;
    ThreatState s{Eigen::VectorXd::Zero(2), 0};

    const int trials = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < trials; ++i) {
        const ThreatState next = acscp::step_truth(d, s, rng);
        sum += next.theta[0];
        sum_sq += next.theta[0] * next.theta[0];
    }
    const double mean = sum / trials;
    const double var = sum_sq / trials - mean * mean;
    const double se_mean = std::sqrt(d.process_noise / trials);
    CHECK(std::abs(mean) <= 3.0 * se_mean);
    // Variance of the sample variance for a normal is 2 sigma^4 / n.
    const double se_var = std::sqrt(2.0 * d.process_noise * d.process_noise / trials);
    CHECK(std::abs(var - d.process_noise) <= 3.0 * se_var);
}

TEST_CASE("guarded truth step keeps the field positive", "[threat]") {
    GridWorld g(1.0, 5);
    BasisSet b = single_basis({0.0, 0.0}, 1.0);
    const Eigen::MatrixXd phi_grid = acscp::basis_matrix(b, g);

    ThreatDynamics d;
    d.a_matrix = Eigen::MatrixXd::Identity(1, 1);
    d.process_noise = 4.0;  // large noise forces frequent rejections
    ThreatState s{Eigen::VectorXd::Constant(1, 0.05), 0};

    std::mt19937_64 rng(99);
    acscp::TruthStepGuard guard;
    for (int k = 0; k < 200; ++k) {
        s = acscp::step_truth_positive(d, s, phi_grid, rng, 1e-3, 100, &guard);
        const double lowest = 1.0 + (phi_grid * s.theta).minCoeff();
        CHECK(lowest >= 1e-3);
    }
    CHECK(guard.redraws > 0);

    // max_attempts = 0 clamps immediately and never draws.
    ThreatState neg{Eigen::VectorXd::Constant(1, -2.0), 0};
    acscp::TruthStepGuard clamp_guard;
    ThreatState clamped =
        acscp::step_truth_positive(d, neg, phi_grid, rng, 1e-3, 0, &clamp_guard);
    CHECK(clamped.theta[0] >= 0.0);
    CHECK(clamp_guard.clamps == 1);
}

TEST_CASE("default scenario construction", "[threat]") {
    Scenario s49 = acscp::make_default_scenario(49, 11);
    CHECK(s49.basis.size() == 49);
    // 7 x 7 center lattice spanning the workspace.
    CHECK(s49.basis.centers.front().x() == Catch::Approx(-1.0));
    CHECK(s49.basis.centers.back().y() == Catch::Approx(1.0));
    CHECK(s49.basis.widths[0] ==
          Catch::Approx((2.0 / 6.0) * (2.0 / 6.0)).epsilon(1e-12));
    CHECK(s49.initial.theta.minCoeff() >= 0.0);
    CHECK(s49.initial.theta.maxCoeff() <= 5.0);
    CHECK(s49.dynamics.a_matrix(0, 0) == Catch::Approx(0.999));

    Scenario s1 = acscp::make_default_scenario(1, 2);
    CHECK(s1.basis.centers[0].norm() == 0.0);
    CHECK(s1.basis.widths[0] == Catch::Approx(1.0));

    Scenario s9 = acscp::make_default_scenario(9, 5);
    CHECK(s9.basis.centers[1].x() - s9.basis.centers[0].x() ==
          Catch::Approx(1.0));

    // Same seed, same scenario.
    Scenario a = acscp::make_default_scenario(9, 42);
    Scenario b = acscp::make_default_scenario(9, 42);
    CHECK((a.initial.theta - b.initial.theta).norm() == 0.0);
    Scenario c = acscp::make_default_scenario(9, 43);
    CHECK((a.initial.theta - c.initial.theta).norm() > 0.0);

    CHECK_THROWS_AS(acscp::make_default_scenario(5, 1), std::invalid_argument);
    CHECK_THROWS_AS(acscp::make_default_scenario(4, 1, 1.0, 0.999, 1e-4, 0.0),
                    std::invalid_argument);

    // Default lattice covers the paper-scale grid.
    GridWorld g(1.0, 11);
    CHECK(acscp::covers_grid(s49.basis, g));
}
