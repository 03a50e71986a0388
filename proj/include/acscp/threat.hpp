#ifndef ACSCP_THREAT_HPP
#define ACSCP_THREAT_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "acscp/grid.hpp"

namespace acscp {

/// Gaussian radial basis expansion of the threat intensity:
///   c(x, t) = 1 + sum_n theta_n(t) * exp(-|x - center_n|^2 / (2 * width_n)).
/// width_n is the squared-length-scale denominator term, not a standard
/// deviation.
struct BasisSet {
    std::vector<Eigen::Vector2d> centers;
    Eigen::VectorXd widths;

    int size() const noexcept { return static_cast<int>(centers.size()); }

    void validate() const {
        if (centers.empty())
            throw std::invalid_argument("BasisSet: needs at least one basis");
        if (widths.size() != static_cast<Eigen::Index>(centers.size()))
            throw std::invalid_argument("BasisSet: centers/widths size mismatch");
        for (Eigen::Index n = 0; n < widths.size(); ++n)
            if (!(widths[n] > 0.0))
                throw std::invalid_argument("BasisSet: widths must be positive");
    }
};

/// phi(x), one positive entry per basis function.
inline Eigen::VectorXd basis_vector(const BasisSet& b, const Eigen::Vector2d& x) {
    Eigen::VectorXd phi(b.size());
    for (int n = 0; n < b.size(); ++n) {
        const double r2 = (x - b.centers[static_cast<std::size_t>(n)]).squaredNorm();
        phi[n] = std::exp(-r2 / (2.0 * b.widths[n]));
    }
    return phi;
}

/// Dense table of basis vectors over the grid; row v-1 holds phi(x_v)^T.
inline Eigen::MatrixXd basis_matrix(const BasisSet& b, const GridWorld& g) {
    Eigen::MatrixXd table(g.num_vertices(), b.size());
    for (VertexId v = 1; v <= g.num_vertices(); ++v)
        table.row(v - 1) = basis_vector(b, g.coord(v)).transpose();
    return table;
}

inline double field_value(const BasisSet& b, const Eigen::VectorXd& theta,
                          const Eigen::Vector2d& x) {
    if (theta.size() != b.size())
        throw std::invalid_argument("field_value: theta size mismatch");
    return 1.0 + basis_vector(b, x).dot(theta);
}

/// True when max_n phi_n(x_v) >= floor at every grid vertex, i.e. no grid
/// point sits outside the reach of all bases.
inline bool covers_grid(const BasisSet& b, const GridWorld& g,
                        double floor = 1e-3) {
    for (VertexId v = 1; v <= g.num_vertices(); ++v) {
        const Eigen::VectorXd phi = basis_vector(b, g.coord(v));
        if (phi.maxCoeff() < floor) return false;
    }
    return true;
}

/// Linear-Gaussian parameter dynamics theta_k = A theta_{k-1} + w,
/// w ~ N(0, process_noise * I).
struct ThreatDynamics {
    Eigen::MatrixXd a_matrix;
    double process_noise = 0.0;

    void validate(int n_params) const {
        if (a_matrix.rows() != n_params || a_matrix.cols() != n_params)
            throw std::invalid_argument("ThreatDynamics: A must be N_P x N_P");
        if (process_noise < 0.0)
            throw std::invalid_argument("ThreatDynamics: process_noise must be >= 0");
    }
};

struct ThreatState {
    Eigen::VectorXd theta;
    long step = 0;
};

/// One unconstrained dynamics step. Noise components are drawn in index
/// order so the consumed stream is reproducible.
inline ThreatState step_truth(const ThreatDynamics& d, const ThreatState& s,
                              std::mt19937_64& rng) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double sigma = std::sqrt(d.process_noise);
    Eigen::VectorXd next = d.a_matrix * s.theta;
    for (Eigen::Index n = 0; n < next.size(); ++n) next[n] += sigma * unit(rng);
    return ThreatState{std::move(next), s.step + 1};
}

struct TruthStepGuard {
    int redraws = 0;
    int clamps = 0;
};

/// Dynamics step that keeps the field value above `floor` at every grid
/// vertex. Offending noise draws are rejected and redrawn; after
/// max_attempts rejections the negative parameter components are clamped to
/// zero, which restores c >= 1 everywhere.
inline ThreatState step_truth_positive(const ThreatDynamics& d, const ThreatState& s,
                                       const Eigen::MatrixXd& phi_grid,
                                       std::mt19937_64& rng, double floor = 1e-3,
                                       int max_attempts = 100,
                                       TruthStepGuard* guard = nullptr) {
    std::normal_distribution<double> unit(0.0, 1.0);
    const double sigma = std::sqrt(d.process_noise);
    const Eigen::VectorXd drift = d.a_matrix * s.theta;
    Eigen::VectorXd candidate(drift.size());
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        candidate = drift;
        for (Eigen::Index n = 0; n < candidate.size(); ++n)
            candidate[n] += sigma * unit(rng);
        const double lowest = 1.0 + (phi_grid * candidate).minCoeff();
        if (lowest >= floor) return ThreatState{std::move(candidate), s.step + 1};
        if (guard) ++guard->redraws;
    }
    candidate = candidate.cwiseMax(0.0);
    if (guard) ++guard->clamps;
    return ThreatState{std::move(candidate), s.step + 1};
}

struct Scenario {
    BasisSet basis;
    ThreatDynamics dynamics;
    ThreatState initial;
};

/// Standard randomized scenario: n_params basis centers on a uniform
/// sqrt(n_params) x sqrt(n_params) lattice spanning the workspace, each
/// width equal to the squared center spacing, A = rho * I, and nonnegative
/// initial parameters drawn uniformly from [0, theta_max].
inline Scenario make_default_scenario(int n_params, std::uint64_t seed,
                                      double half_width = 1.0, double rho = 0.999,
                                      double process_noise = 1e-4,
                                      double theta_max = 5.0) {
    const int per_side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_params))));
    if (per_side * per_side != n_params)
        throw std::invalid_argument("make_default_scenario: n_params must be a perfect square");
    if (!(theta_max > 0.0))
        throw std::invalid_argument("make_default_scenario: theta_max must be positive");

    Scenario scen;
    if (per_side == 1) {
        scen.basis.centers.emplace_back(0.0, 0.0);
        scen.basis.widths = Eigen::VectorXd::Constant(1, half_width * half_width);
    } else {
        const double gap = 2.0 * half_width / static_cast<double>(per_side - 1);
        scen.basis.widths = Eigen::VectorXd::Constant(n_params, gap * gap);
        for (int row = 0; row < per_side; ++row)
            for (int col = 0; col < per_side; ++col)
                scen.basis.centers.emplace_back(-half_width + gap * col,
                                                -half_width + gap * row);
    }
    scen.basis.validate();

    scen.dynamics.a_matrix =
        rho * Eigen::MatrixXd::Identity(n_params, n_params);
    scen.dynamics.process_noise = process_noise;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.0, theta_max);
    scen.initial.theta.resize(n_params);
    for (int n = 0; n < n_params; ++n) scen.initial.theta[n] = amp(rng);
    scen.initial.step = 0;
    return scen;
}

}  // namespace acscp

#endif  // ACSCP_THREAT_HPP
