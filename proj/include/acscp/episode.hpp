#ifndef ACSCP_EPISODE_HPP
#define ACSCP_EPISODE_HPP

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "acscp/crmi.hpp"
#include "acscp/estimation.hpp"
#include "acscp/grid.hpp"
#include "acscp/planning.hpp"
#include "acscp/threat.hpp"

namespace acscp {

/// full keeps parameter vectors in every replan record; light drops them to
/// shrink logs (snapshots and belief replay need full detail).
enum class LogDetail { full, light };

struct EpisodeConfig {
    // workspace
    double half_width = 1.0;
    int side_count = 11;
    // threat field
    int n_params = 49;
    double sigma_p = 1e-4;
    double rho = 0.999;
    double theta_max = 5.0;
    double coverage_floor = 1e-3;
    // agents
    int sensor_count = 2;
    double sensor_speed = 0.05;
    double ego_speed = 0.01;
    VertexId start = 1;
    VertexId goal = 0;  // 0 resolves to the top-right corner
    // sensing and estimation
    double sigma_r = 0.1;
    double chi = 1e3;
    RewardWeights reward;
    CrmiHorizon crmi_horizon = CrmiHorizon::one_step;
    PlanningMode plan_mode = PlanningMode::frozen;
    // run control
    std::uint64_t seed = 1;
    int ticks_per_edge = 20;
    long max_ticks = 1000000;
    LogDetail log_detail = LogDetail::full;
    bool benchmark_time_varying = false;

    double spacing() const {
        return 2.0 * half_width / static_cast<double>(side_count - 1);
    }
    /// Tick length chosen so the ego crosses one edge in ticks_per_edge
    /// ticks.
    double tick_duration() const {
        return spacing() / (ego_speed * static_cast<double>(ticks_per_edge));
    }
    VertexId resolved_goal() const {
        return goal == 0 ? side_count * side_count : goal;
    }

    void validate() const {
        if (!(half_width > 0.0))
            throw std::invalid_argument("EpisodeConfig: half_width must be positive");
        if (side_count < 2)
            throw std::invalid_argument("EpisodeConfig: side_count must be >= 2");
        if (n_params < 1)
            throw std::invalid_argument("EpisodeConfig: n_params must be >= 1");
        if (sigma_p < 0.0)
            throw std::invalid_argument("EpisodeConfig: sigma_p must be >= 0");
        if (!(theta_max > 0.0))
            throw std::invalid_argument("EpisodeConfig: theta_max must be positive");
        if (coverage_floor < 0.0)
            throw std::invalid_argument("EpisodeConfig: coverage_floor must be >= 0");
        const int n_g = side_count * side_count;
        if (sensor_count < 1 || sensor_count >= n_g - 1)
            throw std::invalid_argument("EpisodeConfig: sensor_count out of range");
        if (!(sensor_speed > 0.0) || !(ego_speed > 0.0))
            throw std::invalid_argument("EpisodeConfig: speeds must be positive");
        if (start < 1 || start > n_g)
            throw std::invalid_argument("EpisodeConfig: start vertex out of range");
        if (goal < 0 || goal > n_g)
            throw std::invalid_argument("EpisodeConfig: goal vertex out of range");
        if (resolved_goal() == start)
            throw std::invalid_argument("EpisodeConfig: start and goal must differ");
        if (!(sigma_r > 0.0))
            throw std::invalid_argument("EpisodeConfig: sigma_r must be positive");
        if (!(chi > 0.0))
            throw std::invalid_argument("EpisodeConfig: chi must be positive");
        reward.validate();
        if (ticks_per_edge < 1)
            throw std::invalid_argument("EpisodeConfig: ticks_per_edge must be >= 1");
        if (max_ticks < 1)
            throw std::invalid_argument("EpisodeConfig: max_ticks must be >= 1");
    }
};

struct TickRecord {
    long tick = 0;
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double integrand = 0.0;  // phi(x)^T theta_true
};

struct ArrivalRecord {
    long tick = 0;
    double t = 0.0;
    int sensor = 0;
    VertexId vertex = 0;
    double measured = 0.0;  // raw field sample including noise
};

enum class RecordKind { prior, replan, terminal };

/// Snapshot written at initialization, at every sensor arrival, and at
/// episode end.
struct ReplanRecord {
    RecordKind kind = RecordKind::replan;
    long tick = 0;
    double t = 0.0;
    int sensor = -1;
    std::vector<VertexId> future;  // remaining plan, ego's next vertex first
    double remaining_cost = 0.0;
    double path_variance = 0.0;
    VertexId chosen_vertex = 0;
    double chosen_crmi = 0.0;
    double chosen_reward = 0.0;
    double alpha = 0.0;
    double chosen_distance = 0.0;
    long committed = 0;  // vertices of the traveled prefix so far
    int clamped_weights = 0;
    double cov_trace = 0.0;
    Eigen::VectorXd theta_hat;   // empty under light detail
    Eigen::VectorXd theta_true;  // empty under light detail
    std::vector<VertexId> sensor_config;  // assignments entering the decision
};

struct EpisodeSummary {
    long ticks = 0;
    double duration = 0.0;
    bool reached_goal = false;
    long measurement_count = 0;   // S
    long distinct_vertices = 0;   // U
    double incurred = 0.0;        // integral of phi^T theta along the ego track
    // filled by evaluate_episode
    bool has_benchmarks = false;
    double true_optimal_incurred = 0.0;
    double worst_case_incurred = 0.0;
    bool degenerate = false;
    double exposure = 0.0;
    double efficiency = 0.0;
    std::vector<VertexId> true_optimal_path;
    std::vector<VertexId> worst_case_path;
    bool worst_heuristic = false;
    bool worst_adjusted = false;
    // diagnostics
    int clamped_weights = 0;
    int crmi_floor_hits = 0;
    int crmi_cap_hits = 0;
    int truth_redraws = 0;
    int truth_clamps = 0;
};

struct EpisodeLog {
    std::string schema = "acscp-episode/v1";
    EpisodeConfig config;
    Scenario scenario;
    std::vector<TickRecord> ticks;
    std::vector<ArrivalRecord> arrivals;
    std::vector<ReplanRecord> replans;
    std::vector<VertexId> traveled;
    EpisodeSummary summary;
};

struct SensorState {
    VertexId assigned = 0;
    VertexId last_vertex = 0;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    bool in_transit = false;
    double trip_length = 0.0;
    double remaining = 0.0;
    long arrivals = 0;
};

/// Decorrelated random stream derived from the run seed.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag),
                      static_cast<std::uint32_t>(tag >> 32)};
    return std::mt19937_64(seq);
}

class EpisodeState {
public:
    EpisodeState(const EpisodeConfig& cfg, Scenario scen)
        : config_(cfg), grid_(cfg.half_width, cfg.side_count), scenario_(std::move(scen)) {
        config_.validate();
        scenario_.basis.validate();
        scenario_.dynamics.validate(scenario_.basis.size());
        if (scenario_.initial.theta.size() != scenario_.basis.size())
            throw std::invalid_argument("EpisodeState: initial parameter size mismatch");
        if (!covers_grid(scenario_.basis, grid_, config_.coverage_floor))
            throw std::invalid_argument("EpisodeState: basis does not cover the grid");

        phi_grid_ = basis_matrix(scenario_.basis, grid_);
        const double initial_min = 1.0 + (phi_grid_ * scenario_.initial.theta).minCoeff();
        if (initial_min < config_.coverage_floor)
            throw std::invalid_argument("EpisodeState: initial field below positivity floor");

        edge_ = make_edge_propagation(scenario_.dynamics, config_.ticks_per_edge);
        truth_ = scenario_.initial;
        belief_ = init_belief(scenario_.basis.size(), config_.chi);
        rng_truth_ = substream(config_.seed, 0x74727574);
        rng_meas_ = substream(config_.seed, 0x6d656173);

        log_.config = config_;
        log_.scenario = scenario_;

        initialize_agents();
    }

    const EpisodeConfig& config() const noexcept { return config_; }
    const GridWorld& grid() const noexcept { return grid_; }
    const Belief& belief() const noexcept { return belief_; }
    const ThreatState& truth() const noexcept { return truth_; }
    const std::vector<SensorState>& sensors() const noexcept { return sensors_; }
    const std::vector<VertexId>& reached() const noexcept { return reached_; }
    const std::vector<VertexId>& future() const noexcept { return future_; }
    VertexId target() const noexcept { return target_; }
    bool finished() const noexcept { return finished_; }
    long tick_count() const noexcept { return tick_count_; }
    const EpisodeLog& log() const noexcept { return log_; }

    void step_tick() {
        if (finished_) throw std::logic_error("EpisodeState: episode already finished");
        ++tick_count_;
        const double dt = config_.tick_duration();
        const double t = static_cast<double>(tick_count_) * dt;

        TruthStepGuard guard;
        truth_ = step_truth_positive(scenario_.dynamics, truth_, phi_grid_, rng_truth_,
                                     config_.coverage_floor, 100, &guard);
        log_.summary.truth_redraws += guard.redraws;
        log_.summary.truth_clamps += guard.clamps;
        belief_ = predict(belief_, scenario_.dynamics, 1);

        advance_ego();
        if (!finished_)
            for (int j = 0; j < config_.sensor_count; ++j) advance_sensor(j, t);
        record_tick(t);
    }

    /// Runs to goal arrival and finalizes the log.
    EpisodeLog run() {
        while (!finished_) {
            if (tick_count_ >= config_.max_ticks)
                throw std::runtime_error("EpisodeState: tick budget exhausted");
            step_tick();
        }
        finalize();
        return std::move(log_);
    }

private:
    void initialize_agents() {
        const VertexId goal = config_.resolved_goal();
        reached_ = {config_.start};
        ego_position_ = grid_.coord(config_.start);

        // Sensors start on the nearest free vertices around the start,
        // ring by ring, ascending ids inside a ring.
        sensors_.resize(static_cast<std::size_t>(config_.sensor_count));
        {
            int placed = 0;
            for (int ring = 1; placed < config_.sensor_count; ++ring) {
                if (ring > 2 * (grid_.side_count() - 1))
                    throw std::invalid_argument("EpisodeState: not enough vertices for sensors");
                for (VertexId v = 1; v <= grid_.num_vertices() && placed < config_.sensor_count; ++v) {
                    if (grid_.manhattan(config_.start, v) == ring) {
                        SensorState s;
                        s.assigned = v;
                        s.last_vertex = v;
                        s.position = grid_.coord(v);
                        sensors_[static_cast<std::size_t>(placed)] = s;
                        ++placed;
                    }
                }
            }
        }

        append_snapshot(RecordKind::prior, 0, 0.0, -1, {}, 0, nullptr);

        // Joint first measurement from the initial configuration.
        const std::vector<VertexId> config_now = assignments();
        const MeasurementModel model =
            build_measurement_model(scenario_.basis, grid_, config_now, config_.sigma_r);
        Eigen::VectorXd z(config_.sensor_count);
        for (int j = 0; j < config_.sensor_count; ++j) {
            const VertexId v = config_now[static_cast<std::size_t>(j)];
            const double sample = measure_at(grid_.coord(v));
            z[j] = sample - 1.0;
            log_.arrivals.push_back({0, 0.0, j, v, sample});
            measured_.insert(v);
        }
        belief_ = update(belief_, model, z);

        PlanStats stats;
        const EdgeCostField field = current_cost_field();
        const Path plan = plan_optimal_path(grid_, field, config_.start, goal, &stats);
        log_.summary.clamped_weights += stats.clamped_weights;
        future_.assign(plan.vertices.begin() + 1, plan.vertices.end());
        target_ = future_.front();
        progress_ = 0;

        for (int j = 0; j < config_.sensor_count; ++j)
            reassign_sensor(j, 0, 0.0, stats.clamped_weights);

        const double g = integrand();
        last_integrand_ = g;
        log_.ticks.push_back({0, 0.0, ego_position_.x(), ego_position_.y(), g});
    }

    std::vector<VertexId> assignments() const {
        std::vector<VertexId> out;
        out.reserve(sensors_.size());
        for (const SensorState& s : sensors_) out.push_back(s.assigned);
        return out;
    }

    EdgeCostField current_cost_field() const {
        return make_cost_field(phi_grid_, grid_.spacing(), belief_.mean, config_.plan_mode,
                               &scenario_.dynamics, config_.ticks_per_edge);
    }

    double measure_at(const Eigen::Vector2d& x) {
        std::normal_distribution<double> unit(0.0, 1.0);
        return field_value(scenario_.basis, truth_.theta, x) + config_.sigma_r * unit(rng_meas_);
    }

    double integrand() const {
        return basis_vector(scenario_.basis, ego_position_).dot(truth_.theta);
    }

    void advance_ego() {
        ++progress_;
        if (progress_ >= config_.ticks_per_edge) {
            reached_.push_back(target_);
            ego_position_ = grid_.coord(target_);
            if (target_ == config_.resolved_goal()) {
                finished_ = true;
                return;
            }
            future_.erase(future_.begin());
            target_ = future_.front();
            progress_ = 0;
            return;
        }
        const Eigen::Vector2d from = grid_.coord(reached_.back());
        const double frac =
            static_cast<double>(progress_) / static_cast<double>(config_.ticks_per_edge);
        ego_position_ = from + frac * (grid_.coord(target_) - from);
    }

    void advance_sensor(int j, double t) {
        SensorState& s = sensors_[static_cast<std::size_t>(j)];
        if (!s.in_transit) return;
        s.remaining -= config_.sensor_speed * config_.tick_duration();
        if (s.remaining > 1e-12) {
            const Eigen::Vector2d from = grid_.coord(s.last_vertex);
            const Eigen::Vector2d to = grid_.coord(s.assigned);
            s.position = to - (s.remaining / s.trip_length) * (to - from);
            return;
        }

        // Arrival: the rest of the tick is spent measuring.
        s.remaining = 0.0;
        s.in_transit = false;
        s.last_vertex = s.assigned;
        s.position = grid_.coord(s.assigned);
        ++s.arrivals;

        const double sample = measure_at(s.position);
        log_.arrivals.push_back({tick_count_, t, j, s.assigned, sample});
        measured_.insert(s.assigned);
        const MeasurementModel model =
            build_measurement_model(scenario_.basis, grid_, {s.assigned}, config_.sigma_r);
        Eigen::VectorXd z(1);
        z[0] = sample - 1.0;
        belief_ = update(belief_, model, z);

        const VertexId goal = config_.resolved_goal();
        int clamped = 0;
        if (target_ != goal) {
            PlanStats stats;
            const EdgeCostField field = current_cost_field();
            const Path fresh = plan_optimal_path(grid_, field, target_, goal, &stats);
            clamped = stats.clamped_weights;
            log_.summary.clamped_weights += stats.clamped_weights;
            future_ = fresh.vertices;
        } else {
            future_ = {goal};
        }
        reassign_sensor(j, tick_count_, t, clamped);
    }

    /// Greedy reassignment of sensor j against the current remaining plan;
    /// appends the matching replan record.
    void reassign_sensor(int j, long tick, double t, int clamped) {
        Path context;
        context.vertices.reserve(future_.size() + 1);
        context.vertices.push_back(reached_.back());
        context.vertices.insert(context.vertices.end(), future_.begin(), future_.end());

        GreedyContext ctx;
        ctx.basis = &scenario_.basis;
        ctx.grid = &grid_;
        ctx.belief = &belief_;
        ctx.dynamics = &scenario_.dynamics;
        ctx.edge = &edge_;
        ctx.future = &context;
        ctx.config = assignments();
        ctx.ego_next = grid_.coord(target_);
        ctx.sigma_r = config_.sigma_r;
        ctx.horizon = config_.crmi_horizon;
        ctx.tick_duration = config_.tick_duration();
        ctx.sensor_speed = config_.sensor_speed;

        CrmiGuards guards;
        const GreedySelection sel = greedy_next_config(ctx, j, config_.reward, &guards);
        log_.summary.crmi_floor_hits += guards.floor_hits;
        log_.summary.crmi_cap_hits += guards.cap_hits;

        append_snapshot(RecordKind::replan, tick, t, j, ctx.config, clamped, &sel);

        SensorState& s = sensors_[static_cast<std::size_t>(j)];
        s.assigned = sel.vertex;
        s.trip_length = (grid_.coord(sel.vertex) - s.position).norm();
        s.remaining = s.trip_length;
        s.in_transit = true;
    }

    void append_snapshot(RecordKind kind, long tick, double t, int sensor,
                         const std::vector<VertexId>& sensor_config, int clamped,
                         const GreedySelection* sel) {
        ReplanRecord rec;
        rec.kind = kind;
        rec.tick = tick;
        rec.t = t;
        rec.sensor = sensor;
        rec.committed = static_cast<long>(reached_.size());
        rec.clamped_weights = clamped;
        rec.cov_trace = belief_.cov.trace();
        rec.sensor_config = sensor_config.empty() ? assignments() : sensor_config;
        if (kind == RecordKind::replan) {
            rec.future = future_;
            Path context;
            context.vertices.push_back(reached_.back());
            context.vertices.insert(context.vertices.end(), future_.begin(), future_.end());
            rec.remaining_cost =
                expected_path_cost(scenario_.basis, grid_, belief_.mean, context,
                                   config_.plan_mode, &scenario_.dynamics,
                                   config_.ticks_per_edge);
            if (sel) {
                rec.path_variance = sel->path_variance;
                rec.chosen_vertex = sel->vertex;
                rec.chosen_crmi = sel->crmi_value;
                rec.chosen_reward = sel->reward;
                rec.alpha = sel->alpha;
                rec.chosen_distance = sel->distance;
            }
        }
        if (config_.log_detail == LogDetail::full) {
            rec.theta_hat = belief_.mean;
            rec.theta_true = truth_.theta;
        }
        log_.replans.push_back(std::move(rec));
    }

    void record_tick(double t) {
        const double g = integrand();
        log_.summary.incurred +=
            0.5 * (last_integrand_ + g) * config_.tick_duration();
        last_integrand_ = g;
        log_.ticks.push_back({tick_count_, t, ego_position_.x(), ego_position_.y(), g});
    }

    void finalize() {
        append_snapshot(RecordKind::terminal, tick_count_,
                        static_cast<double>(tick_count_) * config_.tick_duration(), -1,
                        {}, 0, nullptr);
        log_.traveled = reached_;
        log_.summary.ticks = tick_count_;
        log_.summary.duration = static_cast<double>(tick_count_) * config_.tick_duration();
        log_.summary.reached_goal = finished_;
        log_.summary.measurement_count = static_cast<long>(log_.arrivals.size());
        log_.summary.distinct_vertices = static_cast<long>(measured_.size());
    }

    EpisodeConfig config_;
    GridWorld grid_;
    Scenario scenario_;
    Eigen::MatrixXd phi_grid_;
    EdgePropagation edge_;
    ThreatState truth_;
    Belief belief_;
    std::vector<SensorState> sensors_;
    std::vector<VertexId> reached_;
    std::vector<VertexId> future_;
    VertexId target_ = 0;
    int progress_ = 0;
    Eigen::Vector2d ego_position_ = Eigen::Vector2d::Zero();
    bool finished_ = false;
    long tick_count_ = 0;
    std::mt19937_64 rng_truth_;
    std::mt19937_64 rng_meas_;
    std::set<VertexId> measured_;
    double last_integrand_ = 0.0;
    EpisodeLog log_;
};

inline Scenario default_scenario_for(const EpisodeConfig& cfg) {
    return make_default_scenario(cfg.n_params, cfg.seed, cfg.half_width, cfg.rho,
                                 cfg.sigma_p, cfg.theta_max);
}

inline EpisodeLog run_episode(const EpisodeConfig& cfg, const Scenario& scen) {
    EpisodeState state(cfg, scen);
    return state.run();
}

inline EpisodeLog run_episode(const EpisodeConfig& cfg) {
    return run_episode(cfg, default_scenario_for(cfg));
}

}  // namespace acscp

#endif  // ACSCP_EPISODE_HPP
