#ifndef ACSCP_ESTIMATION_HPP
#define ACSCP_ESTIMATION_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

#include "acscp/grid.hpp"
#include "acscp/threat.hpp"

namespace acscp {

/// Gaussian belief over the threat parameters.
struct Belief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    long step = 0;

    int size() const noexcept { return static_cast<int>(mean.size()); }
};

/// Uninformed initial belief: zero mean, chi * I covariance.
inline Belief init_belief(int n_params, double chi) {
    if (n_params < 1)
        throw std::invalid_argument("init_belief: n_params must be >= 1");
    if (!(chi > 0.0))
        throw std::invalid_argument("init_belief: chi must be positive");
    Belief bel;
    bel.mean = Eigen::VectorXd::Zero(n_params);
    bel.cov = chi * Eigen::MatrixXd::Identity(n_params, n_params);
    bel.step = 0;
    return bel;
}

/// Linear measurement z = H theta + v, v ~ N(0, R). Each row of H is the
/// basis vector at one sensing vertex; the measured quantity is c(x) - 1.
struct MeasurementModel {
    Eigen::MatrixXd H;
    Eigen::MatrixXd R;

    int rows() const noexcept { return static_cast<int>(H.rows()); }
};

/// Model for a sensor configuration given as distinct grid vertices; row
/// order follows the configuration order. R = sigma_r^2 * I.
inline MeasurementModel build_measurement_model(const BasisSet& basis,
                                                const GridWorld& grid,
                                                const std::vector<VertexId>& config,
                                                double sigma_r) {
    if (config.empty())
        throw std::invalid_argument("build_measurement_model: empty configuration");
    if (!(sigma_r > 0.0))
        throw std::invalid_argument("build_measurement_model: sigma_r must be positive");
    std::set<VertexId> seen;
    for (VertexId v : config) {
        if (!grid.contains(v))
            throw std::invalid_argument("build_measurement_model: invalid vertex id");
        if (!seen.insert(v).second)
            throw std::invalid_argument("build_measurement_model: duplicate vertex in configuration");
    }
    MeasurementModel model;
    model.H.resize(static_cast<Eigen::Index>(config.size()), basis.size());
    for (std::size_t j = 0; j < config.size(); ++j)
        model.H.row(static_cast<Eigen::Index>(j)) =
            basis_vector(basis, grid.coord(config[j])).transpose();
    model.R = sigma_r * sigma_r *
              Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(config.size()),
                                        static_cast<Eigen::Index>(config.size()));
    return model;
}

/// Open-loop propagation of the belief by `steps` dynamics steps.
inline Belief predict(const Belief& bel, const ThreatDynamics& dyn, int steps = 1) {
    if (steps < 0) throw std::invalid_argument("predict: steps must be >= 0");
    Belief out = bel;
    const Eigen::MatrixXd q =
        dyn.process_noise * Eigen::MatrixXd::Identity(bel.size(), bel.size());
    for (int s = 0; s < steps; ++s) {
        out.mean = dyn.a_matrix * out.mean;
        out.cov = dyn.a_matrix * out.cov * dyn.a_matrix.transpose() + q;
    }
    out.step = bel.step + steps;
    return out;
}

struct UpdateDiagnostics {
    double min_eig_before_clamp = 0.0;
    bool clamped = false;
};

/// Measurement update in Joseph form, followed by symmetrization and a
/// floor on slightly negative eigenvalues introduced by roundoff.
/// Eigenvalues below -1e-8 are treated as a numerical failure.
inline Belief update(const Belief& bel, const MeasurementModel& model,
                     const Eigen::VectorXd& z, UpdateDiagnostics* diag = nullptr) {
    if (model.H.cols() != bel.size())
        throw std::invalid_argument("update: model/belief size mismatch");
    if (z.size() != model.H.rows())
        throw std::invalid_argument("update: measurement size mismatch");

    const Eigen::MatrixXd innovation_cov =
        model.H * bel.cov * model.H.transpose() + model.R;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(innovation_cov);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("update: innovation covariance factorization failed");
    const Eigen::MatrixXd gain =
        ldlt.solve(model.H * bel.cov).transpose();

    Belief out;
    out.step = bel.step;
    out.mean = bel.mean + gain * (z - model.H * bel.mean);

    const Eigen::MatrixXd identity =
        Eigen::MatrixXd::Identity(bel.size(), bel.size());
    const Eigen::MatrixXd closure = identity - gain * model.H;
    Eigen::MatrixXd cov = closure * bel.cov * closure.transpose() +
                          gain * model.R * gain.transpose();
    cov = 0.5 * (cov + cov.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("update: covariance eigendecomposition failed");
    const double min_eig = eig.eigenvalues().minCoeff();
    if (diag) {
        diag->min_eig_before_clamp = min_eig;
        diag->clamped = min_eig < 0.0;
    }
    if (min_eig < -1e-8)
        throw std::runtime_error("update: covariance lost positive semidefiniteness");
    if (min_eig < 0.0) {
        Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
        cov = eig.eigenvectors() * clamped.asDiagonal() *
              eig.eigenvectors().transpose();
        cov = 0.5 * (cov + cov.transpose());
    }
    out.cov = std::move(cov);
    return out;
}

}  // namespace acscp

#endif  // ACSCP_ESTIMATION_HPP
