#ifndef ACSCP_PLANNING_HPP
#define ACSCP_PLANNING_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "acscp/estimation.hpp"
#include "acscp/grid.hpp"
#include "acscp/threat.hpp"

namespace acscp {

/// frozen prices every edge with the belief mean at planning time;
/// propagated prices edge l with the mean propagated l dynamics blocks
/// ahead, up to a fixed layer horizon.
enum class PlanningMode { frozen, propagated };

/// Vertex threat table used to price edges. Column l holds the expected
/// field value at each vertex after l edges of travel; frozen fields carry a
/// single column.
struct EdgeCostField {
    PlanningMode mode = PlanningMode::frozen;
    double spacing = 0.0;
    Eigen::MatrixXd layer_threat;

    int horizon() const noexcept {
        return static_cast<int>(layer_threat.cols()) - 1;
    }

    /// Weight of an edge arriving at `dest` as its `edge_index`-th edge
    /// (1-based), before clamping. Edge l is priced with the threat table
    /// propagated l blocks ahead, saturating at the horizon.
    double raw_weight(VertexId dest, int edge_index) const {
        const int col = std::min(edge_index, horizon());
        return 1.0 + spacing * (layer_threat(dest - 1, col) - 1.0);
    }
};

/// Builds the pricing table from the current belief mean and a precomputed
/// basis table (one row per vertex). In propagated mode, `horizon_layers`
/// columns of predicted values are tabulated (defaulting to 2 * N_g) and
/// edges beyond the horizon reuse the last column.
inline EdgeCostField make_cost_field(const Eigen::MatrixXd& phi_grid, double spacing,
                                     const Eigen::VectorXd& theta_hat,
                                     PlanningMode mode = PlanningMode::frozen,
                                     const ThreatDynamics* dyn = nullptr,
                                     int steps_per_edge = 0,
                                     int horizon_layers = -1) {
    if (theta_hat.size() != phi_grid.cols())
        throw std::invalid_argument("make_cost_field: theta size mismatch");
    if (!(spacing > 0.0))
        throw std::invalid_argument("make_cost_field: spacing must be positive");
    EdgeCostField field;
    field.mode = mode;
    field.spacing = spacing;
    const Eigen::Index n = phi_grid.rows();
    if (mode == PlanningMode::frozen) {
        field.layer_threat = Eigen::VectorXd::Ones(n) + phi_grid * theta_hat;
        return field;
    }
    if (dyn == nullptr || steps_per_edge < 1)
        throw std::invalid_argument(
            "make_cost_field: propagated mode needs dynamics and steps_per_edge");
    const int horizon = horizon_layers >= 0 ? horizon_layers : static_cast<int>(2 * n);
    field.layer_threat.resize(n, horizon + 1);
    Eigen::MatrixXd block = Eigen::MatrixXd::Identity(theta_hat.size(), theta_hat.size());
    for (int s = 0; s < steps_per_edge; ++s) block = dyn->a_matrix * block;
    Eigen::VectorXd theta = theta_hat;
    for (int l = 0; l <= horizon; ++l) {
        field.layer_threat.col(l) = Eigen::VectorXd::Ones(n) + phi_grid * theta;
        theta = block * theta;
    }
    return field;
}

inline EdgeCostField make_cost_field(const BasisSet& basis, const GridWorld& grid,
                                     const Eigen::VectorXd& theta_hat,
                                     PlanningMode mode = PlanningMode::frozen,
                                     const ThreatDynamics* dyn = nullptr,
                                     int steps_per_edge = 0,
                                     int horizon_layers = -1) {
    return make_cost_field(basis_matrix(basis, grid), grid.spacing(), theta_hat,
                           mode, dyn, steps_per_edge, horizon_layers);
}

struct PlanStats {
    double cost = 0.0;
    int clamped_weights = 0;
    int expanded = 0;
};

namespace detail {

/// Clamped per-destination weights for one layer column, plus the clamp
/// count over table entries.
inline Eigen::VectorXd clamped_layer_weights(const EdgeCostField& field, int col,
                                             int* clamped) {
    Eigen::VectorXd w =
        Eigen::VectorXd::Ones(field.layer_threat.rows()) +
        field.spacing * (field.layer_threat.col(col).array() - 1.0).matrix();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] < 0.0) {
            w[i] = 0.0;
            if (clamped) ++*clamped;
        }
    }
    return w;
}

}  // namespace detail

/// Dijkstra over the grid with edge weights from `field`. Clamped weights
/// are counted in stats. Ties are resolved deterministically: the queue is
/// keyed by (distance, vertex, layer) and an equal-distance relaxation keeps
/// the smallest predecessor id, so equal-cost inputs always produce the same
/// path. In propagated mode the search state is (vertex, capped edge count)
/// and the returned walk may revisit vertices.
inline Path plan_optimal_path(const GridWorld& grid, const EdgeCostField& field,
                              VertexId start, VertexId goal,
                              PlanStats* stats = nullptr) {
    if (!grid.contains(start) || !grid.contains(goal))
        throw std::invalid_argument("plan_optimal_path: invalid endpoint");
    if (field.layer_threat.rows() != grid.num_vertices())
        throw std::invalid_argument("plan_optimal_path: field/grid size mismatch");
    PlanStats local;
    PlanStats& st = stats ? *stats : local;
    if (start == goal) {
        st.cost = 0.0;
        return Path{{start}};
    }

    const int n = grid.num_vertices();
    const int layers = field.horizon() + 1;
    int clamp_count = 0;
    std::vector<Eigen::VectorXd> weight_by_layer;
    weight_by_layer.reserve(static_cast<std::size_t>(layers));
    for (int l = 0; l < layers; ++l)
        weight_by_layer.push_back(detail::clamped_layer_weights(field, l, &clamp_count));
    st.clamped_weights = clamp_count;

    const double inf = std::numeric_limits<double>::infinity();
    const auto state_of = [n](VertexId v, int layer) { return layer * n + (v - 1); };
    const int num_states = layers * n;
    std::vector<double> dist(static_cast<std::size_t>(num_states), inf);
    std::vector<int> pred(static_cast<std::size_t>(num_states), -1);
    std::vector<char> done(static_cast<std::size_t>(num_states), 0);

    using QueueEntry = std::tuple<double, VertexId, int>;
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<QueueEntry>> queue;
    dist[static_cast<std::size_t>(state_of(start, 0))] = 0.0;
    queue.emplace(0.0, start, 0);

    int goal_state = -1;
    while (!queue.empty()) {
        const auto [d, v, layer] = queue.top();
        queue.pop();
        const int s = state_of(v, layer);
        if (done[static_cast<std::size_t>(s)]) continue;
        done[static_cast<std::size_t>(s)] = 1;
        ++st.expanded;
        if (v == goal) {
            goal_state = s;
            break;
        }
        const int next_layer = std::min(layer + 1, layers - 1);
        const Eigen::VectorXd& weights = weight_by_layer[static_cast<std::size_t>(next_layer)];
        for (VertexId u : grid.neighbors(v)) {
            const int su = state_of(u, next_layer);
            if (done[static_cast<std::size_t>(su)]) continue;
            const double nd = d + weights[u - 1];
            if (nd < dist[static_cast<std::size_t>(su)]) {
                dist[static_cast<std::size_t>(su)] = nd;
                pred[static_cast<std::size_t>(su)] = s;
                queue.emplace(nd, u, next_layer);
            } else if (nd == dist[static_cast<std::size_t>(su)] &&
                       pred[static_cast<std::size_t>(su)] >= 0 &&
                       v < pred[static_cast<std::size_t>(su)] % n + 1) {
                pred[static_cast<std::size_t>(su)] = s;
            }
        }
    }
    if (goal_state < 0)
        throw std::runtime_error("plan_optimal_path: goal unreachable");

    st.cost = dist[static_cast<std::size_t>(goal_state)];
    std::vector<VertexId> reversed;
    for (int s = goal_state; s >= 0; s = pred[static_cast<std::size_t>(s)])
        reversed.push_back(s % n + 1);
    std::reverse(reversed.begin(), reversed.end());
    return Path{std::move(reversed)};
}

/// Replan from `current` while keeping the committed prefix untouched: the
/// result is already_traveled followed by a fresh optimal plan. The prefix
/// must be a valid walk ending at `current`.
inline Path replan_from(const GridWorld& grid, const EdgeCostField& field,
                        VertexId current, VertexId goal,
                        const Path& already_traveled, PlanStats* stats = nullptr) {
    if (already_traveled.empty())
        throw std::invalid_argument("replan_from: empty committed prefix");
    for (VertexId v : already_traveled.vertices)
        if (!grid.contains(v))
            throw std::invalid_argument("replan_from: invalid vertex in prefix");
    for (std::size_t i = 0; i + 1 < already_traveled.vertices.size(); ++i)
        if (!grid.adjacent(already_traveled.vertices[i], already_traveled.vertices[i + 1]))
            throw std::invalid_argument("replan_from: prefix is not a grid walk");
    if (already_traveled.back() != current)
        throw std::invalid_argument("replan_from: prefix must end at current vertex");

    const Path fresh = plan_optimal_path(grid, field, current, goal, stats);
    Path full = already_traveled;
    full.vertices.insert(full.vertices.end(), fresh.vertices.begin() + 1,
                         fresh.vertices.end());
    return full;
}

/// Expected cost of a walk under the belief mean:
///   J = L + spacing * sum_l phi(x_l)^T theta_l,
/// where theta_l is the planning-time mean (frozen) or the mean propagated
/// l * steps_per_edge dynamics steps ahead (propagated, exact, no horizon
/// cap).
inline double expected_path_cost(const BasisSet& basis, const GridWorld& grid,
                                 const Eigen::VectorXd& theta_hat, const Path& path,
                                 PlanningMode mode = PlanningMode::frozen,
                                 const ThreatDynamics* dyn = nullptr,
                                 int steps_per_edge = 0) {
    if (path.vertices.empty())
        throw std::invalid_argument("expected_path_cost: empty path");
    if (path.vertices.size() > 1 && !is_valid_path(grid, path))
        throw std::invalid_argument("expected_path_cost: not a grid walk");
    if (mode == PlanningMode::propagated && (dyn == nullptr || steps_per_edge < 1))
        throw std::invalid_argument(
            "expected_path_cost: propagated mode needs dynamics and steps_per_edge");

    const double l = static_cast<double>(path.length());
    double threat_sum = 0.0;
    Eigen::VectorXd theta = theta_hat;
    Eigen::MatrixXd block;
    if (mode == PlanningMode::propagated) {
        block = Eigen::MatrixXd::Identity(basis.size(), basis.size());
        for (int s = 0; s < steps_per_edge; ++s) block = dyn->a_matrix * block;
    }
    for (std::size_t i = 1; i < path.vertices.size(); ++i) {
        if (mode == PlanningMode::propagated) theta = block * theta;
        threat_sum += basis_vector(basis, grid.coord(path.vertices[i])).dot(theta);
    }
    return l + grid.spacing() * threat_sum;
}

}  // namespace acscp

#endif  // ACSCP_PLANNING_HPP
