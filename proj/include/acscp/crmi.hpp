#ifndef ACSCP_CRMI_HPP
#define ACSCP_CRMI_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "acscp/estimation.hpp"
#include "acscp/grid.hpp"
#include "acscp/planning.hpp"
#include "acscp/threat.hpp"

namespace acscp {

/// Mutual-information cap in nats and the variance floor below which a path
/// cost is treated as deterministic.
inline constexpr double kCrmiCap = 30.0;
inline constexpr double kVarianceFloor = 1e-12;

/// Parameter transition and accumulated process noise across one grid edge
/// of ego travel (steps_per_edge dynamics steps).
struct EdgePropagation {
    Eigen::MatrixXd transition;
    Eigen::MatrixXd noise;
    int steps_per_edge = 1;
};

inline EdgePropagation make_edge_propagation(const ThreatDynamics& dyn,
                                             int steps_per_edge) {
    if (steps_per_edge < 0)
        throw std::invalid_argument("make_edge_propagation: steps_per_edge must be >= 0");
    const Eigen::Index n = dyn.a_matrix.rows();
    EdgePropagation edge;
    edge.steps_per_edge = steps_per_edge;
    edge.transition = Eigen::MatrixXd::Identity(n, n);
    edge.noise = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd q = dyn.process_noise * Eigen::MatrixXd::Identity(n, n);
    for (int s = 0; s < steps_per_edge; ++s) {
        edge.noise = dyn.a_matrix * edge.noise * dyn.a_matrix.transpose() + q;
        edge.transition = dyn.a_matrix * edge.transition;
    }
    return edge;
}

/// Second-order summary of the random path cost J over the walk's
/// destination vertices (the first path vertex is the origin and carries no
/// edge cost):
///   variance     = delta^2 * (sum_l phi_l^T P_l phi_l
///                  + 2 * sum_{l<m} phi_l^T P_l (B^T)^(m-l) phi_m)
///   weighted_row = delta * sum_l phi_l^T P_l
/// with P_l the parameter covariance propagated l edges ahead of the belief
/// and B the per-edge transition.
struct PathCovarianceTerms {
    double variance = 0.0;
    Eigen::RowVectorXd weighted_row;
};

inline PathCovarianceTerms path_covariance_terms(const BasisSet& basis,
                                                 const GridWorld& grid,
                                                 const Belief& bel,
                                                 const EdgePropagation& edge,
                                                 const Path& path) {
    if (bel.size() != basis.size())
        throw std::invalid_argument("path_covariance_terms: belief size mismatch");
    PathCovarianceTerms terms;
    terms.weighted_row = Eigen::RowVectorXd::Zero(basis.size());
    const int length = path.length();
    if (length < 1) return terms;
    if (!is_valid_path(grid, path))
        throw std::invalid_argument("path_covariance_terms: not a grid walk");

    const double delta = grid.spacing();
    std::vector<Eigen::VectorXd> phis;
    phis.reserve(static_cast<std::size_t>(length));
    for (int l = 1; l <= length; ++l)
        phis.push_back(basis_vector(basis, grid.coord(path.vertices[static_cast<std::size_t>(l)])));

    // tails[l] = sum_{m>l} (B^T)^(m-l) phi_m, built backward.
    std::vector<Eigen::VectorXd> tails(static_cast<std::size_t>(length));
    tails[static_cast<std::size_t>(length - 1)] = Eigen::VectorXd::Zero(basis.size());
    for (int l = length - 2; l >= 0; --l)
        tails[static_cast<std::size_t>(l)] =
            edge.transition.transpose() *
            (phis[static_cast<std::size_t>(l + 1)] + tails[static_cast<std::size_t>(l + 1)]);

    double diag_sum = 0.0;
    double cross_sum = 0.0;
    Eigen::MatrixXd cov = bel.cov;
    for (int l = 0; l < length; ++l) {
        cov = edge.transition * cov * edge.transition.transpose() + edge.noise;
        const Eigen::RowVectorXd row = phis[static_cast<std::size_t>(l)].transpose() * cov;
        diag_sum += row.dot(phis[static_cast<std::size_t>(l)]);
        cross_sum += row.dot(tails[static_cast<std::size_t>(l)]);
        terms.weighted_row += row;
    }
    terms.variance = delta * delta * (diag_sum + 2.0 * cross_sum);
    terms.weighted_row *= delta;
    return terms;
}

inline double path_cost_variance(const BasisSet& basis, const GridWorld& grid,
                                 const Belief& bel, const ThreatDynamics& dyn,
                                 const Path& path, int steps_per_edge = 1) {
    return path_covariance_terms(basis, grid, bel,
                                 make_edge_propagation(dyn, steps_per_edge), path)
        .variance;
}

/// Cross covariance between the path cost and a measurement vector
/// z = H theta + v: P_Jz = (delta * sum_l phi_l^T P_l) H^T.
inline Eigen::RowVectorXd path_cost_crosscov(const PathCovarianceTerms& terms,
                                             const MeasurementModel& model) {
    if (terms.weighted_row.size() != model.H.cols())
        throw std::invalid_argument("path_cost_crosscov: size mismatch");
    return terms.weighted_row * model.H.transpose();
}

/// Joint Gaussian summary of (J, z) used by the information reward.
struct PathCostBelief {
    double variance = 0.0;          // P_JJ
    Eigen::RowVectorXd cross;       // P_Jz
    Eigen::MatrixXd measurement_cov;  // P_zz
};

struct CrmiGuards {
    int floor_hits = 0;
    int cap_hits = 0;
};

/// Context-relevant mutual information between the path cost and the
/// candidate measurement, in nats:
///   I = 0.5 * log(P_JJ / (P_JJ - P_Jz P_zz^-1 P_Jz^T)).
/// Degenerate inputs are guarded: a variance below the floor yields 0 and a
/// vanishing or negative Schur complement yields the cap.
inline double crmi(const PathCostBelief& joint, CrmiGuards* guards = nullptr) {
    if (joint.variance < kVarianceFloor) {
        if (guards) ++guards->floor_hits;
        return 0.0;
    }
    if (joint.cross.size() != joint.measurement_cov.rows())
        throw std::invalid_argument("crmi: cross/measurement size mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(joint.measurement_cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("crmi: measurement covariance is not positive definite");
    const double reduction = joint.cross.dot(llt.solve(joint.cross.transpose()).col(0));
    const double schur = joint.variance - reduction;
    if (schur <= 0.0) {
        if (guards) ++guards->cap_hits;
        return kCrmiCap;
    }
    const double value = 0.5 * std::log(joint.variance / schur);
    if (value > kCrmiCap) {
        if (guards) ++guards->cap_hits;
        return kCrmiCap;
    }
    return value;
}

/// Blended reconfiguration distance for moving a sensor at `current` to
/// `candidate` while the ego heads for `ego_next`:
///   d = gamma * |x_cand - x_current| + (1 - gamma) * |x_cand - ego_next|.
inline double reconfig_distance(const GridWorld& grid, VertexId candidate,
                                VertexId current, const Eigen::Vector2d& ego_next,
                                double gamma) {
    if (gamma < 0.0 || gamma > 1.0)
        throw std::invalid_argument("reconfig_distance: gamma must be in [0, 1]");
    const double d1 = (grid.coord(candidate) - grid.coord(current)).norm();
    const double d2 = (grid.coord(candidate) - ego_next).norm();
    return gamma * d1 + (1.0 - gamma) * d2;
}

/// Nonpositive distance score f(q) = min_feasible d - d(q); zero exactly at
/// the distance minimizers.
inline double reconfig_cost(double distance, double min_feasible_distance) {
    return min_feasible_distance - distance;
}

/// Scale that makes the distance score commensurate with the information
/// term: alpha = max I / (max d - min d). Degenerate spreads (all candidates
/// equidistant, or no candidate carrying information) give alpha = 0.
inline double alpha_normalizer(const std::vector<double>& crmi_values,
                               const std::vector<double>& distances) {
    if (crmi_values.empty() || crmi_values.size() != distances.size())
        throw std::invalid_argument("alpha_normalizer: empty or mismatched inputs");
    const double max_crmi = *std::max_element(crmi_values.begin(), crmi_values.end());
    const auto [dmin, dmax] = std::minmax_element(distances.begin(), distances.end());
    const double spread = *dmax - *dmin;
    if (spread == 0.0 || max_crmi <= 0.0) return 0.0;
    return max_crmi / spread;
}

enum class AlphaMode { automatic, zero, fixed };

struct RewardWeights {
    double gamma = 1.0;
    AlphaMode alpha_mode = AlphaMode::automatic;
    double alpha_value = 0.0;

    void validate() const {
        if (gamma < 0.0 || gamma > 1.0)
            throw std::invalid_argument("RewardWeights: gamma must be in [0, 1]");
        if (alpha_mode == AlphaMode::fixed && alpha_value < 0.0)
            throw std::invalid_argument("RewardWeights: fixed alpha must be >= 0");
    }
};

/// Prediction horizon for the measurement prior inside the reward: one
/// dynamics step ahead, or the candidate-specific sensor travel time.
enum class CrmiHorizon { one_step, travel_time };

/// Inputs for one greedy reassignment. `config` holds every sensor's
/// current assignment; `future` is the remaining ego walk with the current
/// vertex first, so its destinations are exactly the unvisited plan
/// vertices whose cost the information reward conditions on.
struct GreedyContext {
    const BasisSet* basis = nullptr;
    const GridWorld* grid = nullptr;
    const Belief* belief = nullptr;
    const ThreatDynamics* dynamics = nullptr;
    const EdgePropagation* edge = nullptr;
    const Path* future = nullptr;
    std::vector<VertexId> config;
    Eigen::Vector2d ego_next = Eigen::Vector2d::Zero();
    double sigma_r = 0.1;
    CrmiHorizon horizon = CrmiHorizon::one_step;
    double tick_duration = 0.0;   // used by the travel_time horizon
    double sensor_speed = 0.0;    //
};

struct GreedySelection {
    VertexId vertex = 0;
    double reward = 0.0;
    double crmi_value = 0.0;
    double alpha = 0.0;
    double distance = 0.0;
    double cost_score = 0.0;
    double path_variance = 0.0;  // P_JJ of the context path, candidate independent
};

/// Picks the reassignment target for one sensor by maximizing
/// r(q) = I(q) + alpha * f(q) over all grid vertices not currently assigned
/// to any sensor. Ties keep the smallest vertex id.
inline GreedySelection greedy_next_config(const GreedyContext& ctx, int sensor_index,
                                          const RewardWeights& weights,
                                          CrmiGuards* guards = nullptr) {
    if (!ctx.basis || !ctx.grid || !ctx.belief || !ctx.dynamics || !ctx.edge ||
        !ctx.future)
        throw std::invalid_argument("greedy_next_config: incomplete context");
    weights.validate();
    const int sensor_count = static_cast<int>(ctx.config.size());
    if (sensor_index < 0 || sensor_index >= sensor_count)
        throw std::invalid_argument("greedy_next_config: sensor index out of range");
    for (VertexId v : ctx.config)
        if (!ctx.grid->contains(v))
            throw std::invalid_argument("greedy_next_config: invalid configuration vertex");

    std::vector<VertexId> feasible;
    feasible.reserve(static_cast<std::size_t>(ctx.grid->num_vertices()));
    for (VertexId v = 1; v <= ctx.grid->num_vertices(); ++v)
        if (std::find(ctx.config.begin(), ctx.config.end(), v) == ctx.config.end())
            feasible.push_back(v);
    if (feasible.empty())
        throw std::invalid_argument("greedy_next_config: no feasible vertex");

    const PathCovarianceTerms terms =
        path_covariance_terms(*ctx.basis, *ctx.grid, *ctx.belief, *ctx.edge, *ctx.future);

    const Belief one_step = predict(*ctx.belief, *ctx.dynamics, 1);
    const VertexId from = ctx.config[static_cast<std::size_t>(sensor_index)];

    std::vector<double> crmis(feasible.size(), 0.0);
    std::vector<double> dists(feasible.size(), 0.0);
    std::vector<VertexId> candidate_config = ctx.config;
    for (std::size_t i = 0; i < feasible.size(); ++i) {
        const VertexId cand = feasible[i];
        candidate_config[static_cast<std::size_t>(sensor_index)] = cand;
        const MeasurementModel model =
            build_measurement_model(*ctx.basis, *ctx.grid, candidate_config, ctx.sigma_r);

        PathCostBelief joint;
        joint.variance = terms.variance;
        joint.cross = path_cost_crosscov(terms, model);
        if (ctx.horizon == CrmiHorizon::travel_time) {
            if (!(ctx.tick_duration > 0.0) || !(ctx.sensor_speed > 0.0))
                throw std::invalid_argument(
                    "greedy_next_config: travel_time horizon needs tick_duration and sensor_speed");
            const double trip = (ctx.grid->coord(cand) - ctx.grid->coord(from)).norm();
            const int steps = std::max(
                1, static_cast<int>(std::ceil(trip / (ctx.sensor_speed * ctx.tick_duration))));
            joint.measurement_cov =
                model.H * predict(*ctx.belief, *ctx.dynamics, steps).cov * model.H.transpose() +
                model.R;
        } else {
            joint.measurement_cov =
                model.H * one_step.cov * model.H.transpose() + model.R;
        }
        crmis[i] = crmi(joint, guards);
        dists[i] = reconfig_distance(*ctx.grid, cand, from, ctx.ego_next, weights.gamma);
    }

    double alpha = 0.0;
    switch (weights.alpha_mode) {
        case AlphaMode::automatic: alpha = alpha_normalizer(crmis, dists); break;
        case AlphaMode::zero: alpha = 0.0; break;
        case AlphaMode::fixed: alpha = weights.alpha_value; break;
    }
    const double min_dist = *std::min_element(dists.begin(), dists.end());

    GreedySelection best;
    bool first = true;
    for (std::size_t i = 0; i < feasible.size(); ++i) {
        const double score = reconfig_cost(dists[i], min_dist);
        const double reward = crmis[i] + alpha * score;
        if (first || reward > best.reward) {
            first = false;
            best.vertex = feasible[i];
            best.reward = reward;
            best.crmi_value = crmis[i];
            best.alpha = alpha;
            best.distance = dists[i];
            best.cost_score = score;
        }
    }
    best.path_variance = terms.variance;
    return best;
}

}  // namespace acscp

#endif  // ACSCP_CRMI_HPP
