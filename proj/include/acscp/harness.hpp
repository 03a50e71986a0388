#ifndef ACSCP_HARNESS_HPP
#define ACSCP_HARNESS_HPP

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "acscp/config.hpp"
#include "acscp/episode.hpp"
#include "acscp/metrics.hpp"

namespace acscp {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json vector_to_json(const Eigen::VectorXd& v) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Eigen::VectorXd vector_from_json(const ordered_json& j) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return out;
}

inline ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    ordered_json out = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline Eigen::MatrixXd matrix_from_json(const ordered_json& j) {
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows > 0 ? static_cast<Eigen::Index>(j[0].size()) : 0;
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            out(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
    return out;
}

inline std::string kind_name(RecordKind kind) {
    switch (kind) {
        case RecordKind::prior: return "prior";
        case RecordKind::replan: return "replan";
        case RecordKind::terminal: return "terminal";
    }
    throw std::logic_error("kind_name: unreachable");
}

inline RecordKind kind_from_name(const std::string& name) {
    if (name == "prior") return RecordKind::prior;
    if (name == "replan") return RecordKind::replan;
    if (name == "terminal") return RecordKind::terminal;
    throw std::runtime_error("episode log: unknown record kind '" + name + "'");
}

}  // namespace detail

inline ordered_json log_to_json(const EpisodeLog& log) {
    ordered_json j;
    j["schema"] = log.schema;

    ordered_json cfg;
    for (const auto& [key, value] : config_to_entries(log.config)) cfg[key] = value;
    j["config"] = std::move(cfg);

    ordered_json scen;
    ordered_json centers = ordered_json::array();
    for (const Eigen::Vector2d& c : log.scenario.basis.centers)
        centers.push_back(ordered_json::array({c.x(), c.y()}));
    scen["centers"] = std::move(centers);
    scen["widths"] = detail::vector_to_json(log.scenario.basis.widths);
    scen["a_matrix"] = detail::matrix_to_json(log.scenario.dynamics.a_matrix);
    scen["process_noise"] = log.scenario.dynamics.process_noise;
    scen["theta0"] = detail::vector_to_json(log.scenario.initial.theta);
    j["scenario"] = std::move(scen);

    ordered_json ticks = ordered_json::array();
    for (const TickRecord& r : log.ticks)
        ticks.push_back(ordered_json::array({r.tick, r.t, r.x, r.y, r.integrand}));
    j["ticks"] = std::move(ticks);

    ordered_json arrivals = ordered_json::array();
    for (const ArrivalRecord& r : log.arrivals)
        arrivals.push_back(ordered_json::array({r.tick, r.t, r.sensor, r.vertex, r.measured}));
    j["arrivals"] = std::move(arrivals);

    ordered_json replans = ordered_json::array();
    for (const ReplanRecord& r : log.replans) {
        ordered_json rec;
        rec["kind"] = detail::kind_name(r.kind);
        rec["tick"] = r.tick;
        rec["t"] = r.t;
        rec["sensor"] = r.sensor;
        rec["future"] = r.future;
        rec["remaining_cost"] = r.remaining_cost;
        rec["path_variance"] = r.path_variance;
        rec["chosen_vertex"] = r.chosen_vertex;
        rec["chosen_crmi"] = r.chosen_crmi;
        rec["chosen_reward"] = r.chosen_reward;
        rec["alpha"] = r.alpha;
        rec["chosen_distance"] = r.chosen_distance;
        rec["committed"] = r.committed;
        rec["clamped_weights"] = r.clamped_weights;
        rec["cov_trace"] = r.cov_trace;
        rec["sensor_config"] = r.sensor_config;
        if (r.theta_hat.size() > 0) rec["theta_hat"] = detail::vector_to_json(r.theta_hat);
        if (r.theta_true.size() > 0) rec["theta_true"] = detail::vector_to_json(r.theta_true);
        replans.push_back(std::move(rec));
    }
    j["replans"] = std::move(replans);

    j["traveled"] = log.traveled;

    const EpisodeSummary& s = log.summary;
    ordered_json sum;
    sum["ticks"] = s.ticks;
    sum["duration"] = s.duration;
    sum["reached_goal"] = s.reached_goal;
    sum["measurement_count"] = s.measurement_count;
    sum["distinct_vertices"] = s.distinct_vertices;
    sum["incurred"] = s.incurred;
    sum["has_benchmarks"] = s.has_benchmarks;
    sum["true_optimal_incurred"] = s.true_optimal_incurred;
    sum["worst_case_incurred"] = s.worst_case_incurred;
    sum["degenerate"] = s.degenerate;
    sum["exposure"] = s.exposure;
    sum["efficiency"] = s.efficiency;
    sum["true_optimal_path"] = s.true_optimal_path;
    sum["worst_case_path"] = s.worst_case_path;
    sum["worst_heuristic"] = s.worst_heuristic;
    sum["worst_adjusted"] = s.worst_adjusted;
    sum["clamped_weights"] = s.clamped_weights;
    sum["crmi_floor_hits"] = s.crmi_floor_hits;
    sum["crmi_cap_hits"] = s.crmi_cap_hits;
    sum["truth_redraws"] = s.truth_redraws;
    sum["truth_clamps"] = s.truth_clamps;
    j["summary"] = std::move(sum);
    return j;
}

inline EpisodeLog log_from_json(const ordered_json& j) {
    EpisodeLog log;
    if (!j.contains("schema") || j["schema"].get<std::string>() != log.schema)
        throw std::runtime_error("episode log: unsupported schema");

    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [key, value] : j.at("config").items())
        entries.emplace_back(key, value.get<std::string>());
    log.config = episode_config_from_entries(entries);

    const ordered_json& scen = j.at("scenario");
    for (const auto& c : scen.at("centers"))
        log.scenario.basis.centers.emplace_back(c[0].get<double>(), c[1].get<double>());
    log.scenario.basis.widths = detail::vector_from_json(scen.at("widths"));
    log.scenario.dynamics.a_matrix = detail::matrix_from_json(scen.at("a_matrix"));
    log.scenario.dynamics.process_noise = scen.at("process_noise").get<double>();
    log.scenario.initial.theta = detail::vector_from_json(scen.at("theta0"));

    for (const auto& r : j.at("ticks"))
        log.ticks.push_back({r[0].get<long>(), r[1].get<double>(), r[2].get<double>(),
                             r[3].get<double>(), r[4].get<double>()});
    for (const auto& r : j.at("arrivals"))
        log.arrivals.push_back({r[0].get<long>(), r[1].get<double>(), r[2].get<int>(),
                                r[3].get<VertexId>(), r[4].get<double>()});
    for (const auto& r : j.at("replans")) {
        ReplanRecord rec;
        rec.kind = detail::kind_from_name(r.at("kind").get<std::string>());
        rec.tick = r.at("tick").get<long>();
        rec.t = r.at("t").get<double>();
        rec.sensor = r.at("sensor").get<int>();
        rec.future = r.at("future").get<std::vector<VertexId>>();
        rec.remaining_cost = r.at("remaining_cost").get<double>();
        rec.path_variance = r.at("path_variance").get<double>();
        rec.chosen_vertex = r.at("chosen_vertex").get<VertexId>();
        rec.chosen_crmi = r.at("chosen_crmi").get<double>();
        rec.chosen_reward = r.at("chosen_reward").get<double>();
        rec.alpha = r.at("alpha").get<double>();
        rec.chosen_distance = r.at("chosen_distance").get<double>();
        rec.committed = r.at("committed").get<long>();
        rec.clamped_weights = r.at("clamped_weights").get<int>();
        rec.cov_trace = r.at("cov_trace").get<double>();
        rec.sensor_config = r.at("sensor_config").get<std::vector<VertexId>>();
        if (r.contains("theta_hat")) rec.theta_hat = detail::vector_from_json(r.at("theta_hat"));
        if (r.contains("theta_true")) rec.theta_true = detail::vector_from_json(r.at("theta_true"));
        log.replans.push_back(std::move(rec));
    }
    log.traveled = j.at("traveled").get<std::vector<VertexId>>();

    const ordered_json& sum = j.at("summary");
    EpisodeSummary& s = log.summary;
    s.ticks = sum.at("ticks").get<long>();
    s.duration = sum.at("duration").get<double>();
    s.reached_goal = sum.at("reached_goal").get<bool>();
    s.measurement_count = sum.at("measurement_count").get<long>();
    s.distinct_vertices = sum.at("distinct_vertices").get<long>();
    s.incurred = sum.at("incurred").get<double>();
    s.has_benchmarks = sum.at("has_benchmarks").get<bool>();
    s.true_optimal_incurred = sum.at("true_optimal_incurred").get<double>();
    s.worst_case_incurred = sum.at("worst_case_incurred").get<double>();
    s.degenerate = sum.at("degenerate").get<bool>();
    s.exposure = sum.at("exposure").get<double>();
    s.efficiency = sum.at("efficiency").get<double>();
    s.true_optimal_path = sum.at("true_optimal_path").get<std::vector<VertexId>>();
    s.worst_case_path = sum.at("worst_case_path").get<std::vector<VertexId>>();
    s.worst_heuristic = sum.at("worst_heuristic").get<bool>();
    s.worst_adjusted = sum.at("worst_adjusted").get<bool>();
    s.clamped_weights = sum.at("clamped_weights").get<int>();
    s.crmi_floor_hits = sum.at("crmi_floor_hits").get<int>();
    s.crmi_cap_hits = sum.at("crmi_cap_hits").get<int>();
    s.truth_redraws = sum.at("truth_redraws").get<int>();
    s.truth_clamps = sum.at("truth_clamps").get<int>();
    return log;
}

inline void write_episode_log(const EpisodeLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << log_to_json(log).dump() << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline EpisodeLog read_episode_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("cannot parse '" + path.string() + "': " + e.what());
    }
    return log_from_json(j);
}

struct VerifyResult {
    bool ok = true;
    std::vector<std::string> issues;

    void flag(std::string issue) {
        ok = false;
        issues.push_back(std::move(issue));
    }
};

/// Consistency audit of a finished episode log. Structural checks always
/// run; with full detail the belief trajectory is replayed from the logged
/// measurements and compared against every stored snapshot.
inline VerifyResult verify_log(const EpisodeLog& log, double tol = 1e-9) {
    VerifyResult result;
    const EpisodeConfig& cfg = log.config;
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        result.flag(std::string("config: ") + e.what());
        return result;
    }
    const GridWorld grid(cfg.half_width, cfg.side_count);
    const double dt = cfg.tick_duration();

    if (log.scenario.initial.theta.size() != log.scenario.basis.size())
        result.flag("scenario: parameter size mismatch");

    // Traveled walk.
    if (log.traveled.empty()) {
        result.flag("traveled: empty");
    } else {
        if (log.traveled.front() != cfg.start) result.flag("traveled: wrong start vertex");
        if (log.summary.reached_goal && log.traveled.back() != cfg.resolved_goal())
            result.flag("traveled: wrong final vertex");
        if (log.traveled.size() > 1 && !is_valid_path(grid, Path{log.traveled}))
            result.flag("traveled: not a grid walk");
    }

    // Tick sampling.
    if (static_cast<long>(log.ticks.size()) != log.summary.ticks + 1) {
        result.flag("ticks: sample count disagrees with summary");
    } else {
        for (std::size_t i = 0; i < log.ticks.size(); ++i) {
            if (log.ticks[i].tick != static_cast<long>(i)) {
                result.flag("ticks: non-contiguous tick numbers");
                break;
            }
            if (std::abs(log.ticks[i].t - static_cast<double>(i) * dt) > tol) {
                result.flag("ticks: timestamp grid mismatch");
                break;
            }
        }
        double incurred = 0.0;
        for (std::size_t i = 0; i + 1 < log.ticks.size(); ++i)
            incurred += 0.5 * (log.ticks[i].integrand + log.ticks[i + 1].integrand) * dt;
        const double scale = std::max(1.0, std::abs(log.summary.incurred));
        if (std::abs(incurred - log.summary.incurred) > tol * scale)
            result.flag("summary: incurred cost does not match tick samples");
    }

    // Arrivals.
    long initial_arrivals = 0;
    std::set<VertexId> distinct;
    for (const ArrivalRecord& a : log.arrivals) {
        if (!grid.contains(a.vertex)) {
            result.flag("arrivals: invalid vertex");
            break;
        }
        if (a.tick == 0) ++initial_arrivals;
        distinct.insert(a.vertex);
    }
    if (initial_arrivals != cfg.sensor_count)
        result.flag("arrivals: initial joint measurement incomplete");
    if (static_cast<long>(log.arrivals.size()) != log.summary.measurement_count)
        result.flag("summary: measurement count mismatch");
    if (static_cast<long>(distinct.size()) != log.summary.distinct_vertices)
        result.flag("summary: distinct vertex count mismatch");

    // Snapshot bookkeeping.
    if (log.replans.empty() || log.replans.front().kind != RecordKind::prior)
        result.flag("replans: missing prior snapshot");
    if (log.replans.empty() || log.replans.back().kind != RecordKind::terminal)
        result.flag("replans: missing terminal snapshot");
    for (std::size_t i = 0; i + 1 < log.replans.size(); ++i)
        if (log.replans[i].tick > log.replans[i + 1].tick) {
            result.flag("replans: out of chronological order");
            break;
        }

    const bool full = cfg.log_detail == LogDetail::full;
    if (!result.ok || !full) return result;

    // Belief replay from the logged measurements. Snapshot records are
    // matched against the replayed belief in their recorded order: the
    // prior, then the initialization replans after the joint update, then
    // one replan per arrival, then the terminal snapshot.
    try {
        Belief belief = init_belief(log.scenario.basis.size(), cfg.chi);
        std::size_t ai = 0;
        std::size_t ri = 0;
        const auto check_record = [&](const ReplanRecord& rec) {
            if (rec.theta_hat.size() > 0 &&
                (rec.theta_hat - belief.mean).cwiseAbs().maxCoeff() > tol)
                result.flag("replay: snapshot mean mismatch at tick " +
                            std::to_string(rec.tick));
            if (std::abs(rec.cov_trace - belief.cov.trace()) >
                tol * std::max(1.0, std::abs(rec.cov_trace)))
                result.flag("replay: covariance trace mismatch at tick " +
                            std::to_string(rec.tick));
            if (rec.kind == RecordKind::replan && !rec.future.empty() &&
                rec.committed >= 1 &&
                rec.committed <= static_cast<long>(log.traveled.size())) {
                Path context;
                context.vertices.push_back(
                    log.traveled[static_cast<std::size_t>(rec.committed - 1)]);
                context.vertices.insert(context.vertices.end(), rec.future.begin(),
                                        rec.future.end());
                const double cost = expected_path_cost(
                    log.scenario.basis, grid, belief.mean, context, cfg.plan_mode,
                    &log.scenario.dynamics, cfg.ticks_per_edge);
                if (std::abs(cost - rec.remaining_cost) >
                    tol * std::max(1.0, std::abs(rec.remaining_cost)))
                    result.flag("replay: remaining cost mismatch at tick " +
                                std::to_string(rec.tick));
            }
        };

        check_record(log.replans[ri]);  // prior
        ++ri;

        // Initial joint update.
        {
            std::vector<VertexId> config_now;
            Eigen::VectorXd z(initial_arrivals);
            Eigen::Index row = 0;
            while (ai < log.arrivals.size() && log.arrivals[ai].tick == 0) {
                config_now.push_back(log.arrivals[ai].vertex);
                z[row++] = log.arrivals[ai].measured - 1.0;
                ++ai;
            }
            const MeasurementModel model =
                build_measurement_model(log.scenario.basis, grid, config_now, cfg.sigma_r);
            belief = update(belief, model, z);
        }
        while (ri < log.replans.size() && log.replans[ri].tick == 0 &&
               log.replans[ri].kind == RecordKind::replan) {
            check_record(log.replans[ri]);
            ++ri;
        }

        for (long k = 1; k <= log.summary.ticks; ++k) {
            belief = predict(belief, log.scenario.dynamics, 1);
            while (ai < log.arrivals.size() && log.arrivals[ai].tick == k) {
                const ArrivalRecord& a = log.arrivals[ai];
                const MeasurementModel model = build_measurement_model(
                    log.scenario.basis, grid, {a.vertex}, cfg.sigma_r);
                Eigen::VectorXd z(1);
                z[0] = a.measured - 1.0;
                belief = update(belief, model, z);
                ++ai;
                if (ri < log.replans.size() && log.replans[ri].tick == k &&
                    log.replans[ri].kind == RecordKind::replan &&
                    log.replans[ri].sensor == a.sensor) {
                    check_record(log.replans[ri]);
                    ++ri;
                } else {
                    result.flag("replay: no replan snapshot for arrival at tick " +
                                std::to_string(k));
                }
            }
        }
        if (ri < log.replans.size() &&
            log.replans[ri].kind == RecordKind::terminal) {
            check_record(log.replans[ri]);
            ++ri;
        }
        if (ri != log.replans.size())
            result.flag("replay: " + std::to_string(log.replans.size() - ri) +
                        " snapshot(s) left unmatched");
    } catch (const std::exception& e) {
        result.flag(std::string("replay: ") + e.what());
    }
    return result;
}

/// Writes three TSVs per requested time, taken from the nearest logged
/// snapshot: the true and estimated field over the grid, the ego path split
/// into its traveled and planned portions, and the sensor assignments.
/// Returns the file names; requires full log detail.
inline std::vector<std::string> export_field_snapshots(
    const EpisodeLog& log, const std::vector<double>& times,
    const std::filesystem::path& out_dir) {
    if (log.config.log_detail != LogDetail::full)
        throw std::runtime_error("snapshots need full log detail");
    if (times.empty()) throw std::invalid_argument("snapshots: no times requested");
    const GridWorld grid(log.config.half_width, log.config.side_count);
    const Eigen::MatrixXd phi_grid = basis_matrix(log.scenario.basis, grid);
    std::filesystem::create_directories(out_dir);

    std::vector<std::string> written;
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double want = times[i];
        const ReplanRecord* best = nullptr;
        for (const ReplanRecord& rec : log.replans) {
            if (rec.theta_hat.size() == 0 || rec.theta_true.size() == 0) continue;
            if (!best || std::abs(rec.t - want) < std::abs(best->t - want)) best = &rec;
        }
        if (!best) throw std::runtime_error("snapshots: no usable snapshot records");

        const Eigen::VectorXd true_field =
            Eigen::VectorXd::Ones(grid.num_vertices()) + phi_grid * best->theta_true;
        const Eigen::VectorXd est_field =
            Eigen::VectorXd::Ones(grid.num_vertices()) + phi_grid * best->theta_hat;

        std::ostringstream name;
        name << "snapshot_" << i << ".tsv";
        const std::filesystem::path path = out_dir / name.str();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        out << "# acscp-field-snapshot/v1\n";
        out << "# requested_t\t" << format_double(want) << "\n";
        out << "# snapshot_t\t" << format_double(best->t) << "\n";
        out << "# snapshot_tick\t" << best->tick << "\n";
        out << "vertex\tx\ty\ttrue_value\testimated_value\n";
        for (VertexId v = 1; v <= grid.num_vertices(); ++v) {
            const Eigen::Vector2d& c = grid.coord(v);
            out << v << '\t' << format_double(c.x()) << '\t' << format_double(c.y()) << '\t'
                << format_double(true_field[v - 1]) << '\t'
                << format_double(est_field[v - 1]) << '\n';
        }
        if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
        written.push_back(path.string());

        std::ostringstream path_name;
        path_name << "snapshot_" << i << "_path.tsv";
        const std::filesystem::path ppath = out_dir / path_name.str();
        std::ofstream pout(ppath);
        if (!pout) throw std::runtime_error("cannot open '" + ppath.string() + "' for writing");
        pout << "# acscp-path-snapshot/v1\n";
        pout << "# snapshot_tick\t" << best->tick << "\n";
        pout << "segment\torder\tvertex\tx\ty\n";
        int order = 0;
        const long committed =
            std::min(best->committed, static_cast<long>(log.traveled.size()));
        for (long k = 0; k < committed; ++k, ++order) {
            const VertexId v = log.traveled[static_cast<std::size_t>(k)];
            const Eigen::Vector2d& c = grid.coord(v);
            pout << "traveled\t" << order << '\t' << v << '\t' << format_double(c.x())
                 << '\t' << format_double(c.y()) << '\n';
        }
        for (VertexId v : best->future) {
            const Eigen::Vector2d& c = grid.coord(v);
            pout << "planned\t" << order++ << '\t' << v << '\t' << format_double(c.x())
                 << '\t' << format_double(c.y()) << '\n';
        }
        if (!pout) throw std::runtime_error("failed writing '" + ppath.string() + "'");
        written.push_back(ppath.string());

        std::ostringstream sensor_name;
        sensor_name << "snapshot_" << i << "_sensors.tsv";
        const std::filesystem::path spath = out_dir / sensor_name.str();
        std::ofstream sout(spath);
        if (!sout) throw std::runtime_error("cannot open '" + spath.string() + "' for writing");
        sout << "# acscp-sensor-snapshot/v1\n";
        sout << "# snapshot_tick\t" << best->tick << "\n";
        sout << "sensor\tvertex\tx\ty\n";
        for (std::size_t s = 0; s < best->sensor_config.size(); ++s) {
            const VertexId v = best->sensor_config[s];
            const Eigen::Vector2d& c = grid.coord(v);
            sout << s << '\t' << v << '\t' << format_double(c.x()) << '\t'
                 << format_double(c.y()) << '\n';
        }
        if (!sout) throw std::runtime_error("failed writing '" + spath.string() + "'");
        written.push_back(spath.string());
    }
    return written;
}

struct EpisodeResult {
    std::string scheme;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    EpisodeSummary summary;
};

struct ExperimentResult {
    std::vector<EpisodeResult> episodes;
    std::string exposure_table;
    std::string efficiency_table;
    std::string episode_table;
};

namespace detail {

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;
    long count = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
    MeanStderr out;
    out.count = static_cast<long>(xs.size());
    if (xs.empty()) return out;
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1)) /
                      std::sqrt(static_cast<double>(xs.size()));
    }
    return out;
}

}  // namespace detail

/// Runs the full scheme x ratio x seed sweep. The sensor speed of each cell
/// is ratio * ego speed; the same seed reuses the same scenario and truth
/// realization across schemes and ratios, so cells are paired. Episodes are
/// distributed over `spec.workers` threads into preassigned slots, keeping
/// results and tables identical for any worker count.
inline ExperimentResult run_experiment(const ExperimentSpec& spec,
                                       const std::filesystem::path& out_dir = {},
                                       bool write_logs = false) {
    spec.validate();
    const std::size_t cells =
        spec.schemes.size() * spec.ratios.size() * spec.seeds.size();
    std::vector<EpisodeConfig> configs(cells);
    std::vector<EpisodeResult> results(cells);
    std::vector<std::string> errors(cells);

    std::size_t idx = 0;
    for (const SchemeSpec& scheme : spec.schemes) {
        for (double ratio : spec.ratios) {
            for (std::uint64_t seed : spec.seeds) {
                EpisodeConfig cfg = spec.base;
                cfg.reward = scheme.weights;
                cfg.sensor_speed = ratio * spec.base.ego_speed;
                cfg.seed = seed;
                configs[idx] = cfg;
                results[idx].scheme = scheme.name;
                results[idx].ratio = ratio;
                results[idx].seed = seed;
                ++idx;
            }
        }
    }

    const bool want_logs = write_logs && !out_dir.empty();
    std::filesystem::path episode_dir;
    if (want_logs) {
        episode_dir = out_dir / "episodes";
        std::filesystem::create_directories(episode_dir);
    }

    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells) return;
            try {
                EpisodeLog log = run_episode(configs[i]);
                evaluate_episode(log);
                results[i].summary = log.summary;
                if (want_logs) {
                    std::ostringstream name;
                    name << results[i].scheme << "_r" << format_double(results[i].ratio)
                         << "_s" << results[i].seed << ".json";
                    write_episode_log(log, episode_dir / name.str());
                }
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };

    const int thread_count =
        std::max(1, std::min<int>(spec.workers, static_cast<int>(cells)));
    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(thread_count));
        for (int w = 0; w < thread_count; ++w) threads.emplace_back(worker);
        for (std::thread& th : threads) th.join();
    }
    for (std::size_t i = 0; i < cells; ++i)
        if (!errors[i].empty())
            throw std::runtime_error("episode " + results[i].scheme + " ratio " +
                                     format_double(results[i].ratio) + " seed " +
                                     std::to_string(results[i].seed) + " failed: " +
                                     errors[i]);

    ExperimentResult out;
    out.episodes = std::move(results);

    const auto cell_of = [&](std::size_t si, std::size_t ri, std::size_t vi) {
        return (si * spec.ratios.size() + ri) * spec.seeds.size() + vi;
    };

    {
        std::ostringstream table;
        table << "# acscp-exposure-summary/v1\n";
        table << "scheme\tratio\tepisodes\tdegenerate\tmean_exposure\tstderr_exposure\t"
                 "mean_incurred\tmean_true_optimal\tmean_worst_case\n";
        for (std::size_t si = 0; si < spec.schemes.size(); ++si) {
            for (std::size_t ri = 0; ri < spec.ratios.size(); ++ri) {
                std::vector<double> exposures, incurred, true_opt, worst;
                long degenerate = 0;
                for (std::size_t vi = 0; vi < spec.seeds.size(); ++vi) {
                    const EpisodeSummary& s = out.episodes[cell_of(si, ri, vi)].summary;
                    if (s.degenerate) {
                        ++degenerate;
                    } else {
                        exposures.push_back(s.exposure);
                    }
                    incurred.push_back(s.incurred);
                    true_opt.push_back(s.true_optimal_incurred);
                    worst.push_back(s.worst_case_incurred);
                }
                const detail::MeanStderr e = detail::mean_stderr(exposures);
                table << spec.schemes[si].name << '\t' << format_double(spec.ratios[ri])
                      << '\t' << spec.seeds.size() << '\t' << degenerate << '\t'
                      << format_double(e.mean) << '\t' << format_double(e.stderr_) << '\t'
                      << format_double(detail::mean_stderr(incurred).mean) << '\t'
                      << format_double(detail::mean_stderr(true_opt).mean) << '\t'
                      << format_double(detail::mean_stderr(worst).mean) << '\n';
            }
        }
        out.exposure_table = table.str();
    }

    {
        // Efficiency is reported at the reference ratio only.
        std::size_t ref = 0;
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t ri = 0; ri < spec.ratios.size(); ++ri) {
            const double gap = std::abs(spec.ratios[ri] - spec.reference_ratio);
            if (gap < best_gap) {
                best_gap = gap;
                ref = ri;
            }
        }
        std::ostringstream table;
        table << "# acscp-efficiency-summary/v1\n";
        table << "scheme\tratio\tepisodes\tmean_S\tmean_U\tmean_exposure\tmean_eta\t"
                 "stderr_eta\n";
        for (std::size_t si = 0; si < spec.schemes.size(); ++si) {
            std::vector<double> etas, exposures, counts, distincts;
            for (std::size_t vi = 0; vi < spec.seeds.size(); ++vi) {
                const EpisodeSummary& s = out.episodes[cell_of(si, ref, vi)].summary;
                counts.push_back(static_cast<double>(s.measurement_count));
                distincts.push_back(static_cast<double>(s.distinct_vertices));
                if (!s.degenerate) {
                    etas.push_back(s.efficiency);
                    exposures.push_back(s.exposure);
                }
            }
            const detail::MeanStderr eta = detail::mean_stderr(etas);
            table << spec.schemes[si].name << '\t' << format_double(spec.ratios[ref])
                  << '\t' << spec.seeds.size() << '\t'
                  << format_double(detail::mean_stderr(counts).mean) << '\t'
                  << format_double(detail::mean_stderr(distincts).mean) << '\t'
                  << format_double(detail::mean_stderr(exposures).mean) << '\t'
                  << format_double(eta.mean) << '\t' << format_double(eta.stderr_) << '\n';
        }
        out.efficiency_table = table.str();
    }

    {
        std::ostringstream table;
        table << "# acscp-episodes/v1\n";
        table << "scheme\tratio\tseed\tticks\tS\tU\tincurred\ttrue_optimal\tworst_case\t"
                 "exposure\teta\tdegenerate\treached_goal\n";
        for (const EpisodeResult& r : out.episodes) {
            const EpisodeSummary& s = r.summary;
            table << r.scheme << '\t' << format_double(r.ratio) << '\t' << r.seed << '\t'
                  << s.ticks << '\t' << s.measurement_count << '\t' << s.distinct_vertices
                  << '\t' << format_double(s.incurred) << '\t'
                  << format_double(s.true_optimal_incurred) << '\t'
                  << format_double(s.worst_case_incurred) << '\t'
                  << format_double(s.exposure) << '\t' << format_double(s.efficiency)
                  << '\t' << (s.degenerate ? 1 : 0) << '\t' << (s.reached_goal ? 1 : 0)
                  << '\n';
        }
        out.episode_table = table.str();
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        const auto write_table = [&](const std::string& name, const std::string& body) {
            const std::filesystem::path path = out_dir / name;
            std::ofstream f(path);
            if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
            f << body;
            if (!f) throw std::runtime_error("failed writing '" + path.string() + "'");
        };
        write_table("exposure_summary.tsv", out.exposure_table);
        write_table("efficiency_summary.tsv", out.efficiency_table);
        write_table("episodes.tsv", out.episode_table);
    }
    return out;
}

}  // namespace acscp

#endif  // ACSCP_HARNESS_HPP
