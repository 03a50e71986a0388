#include <acscp/episode.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

using acscp::EpisodeConfig;
using acscp::EpisodeLog;
using acscp::EpisodeState;
using acscp::LogDetail;
using acscp::RecordKind;
using acscp::Scenario;
using acscp::VertexId;

namespace {

EpisodeConfig small_config() {
    EpisodeConfig cfg;
    cfg.side_count = 5;
    cfg.n_params = 4;
    cfg.sensor_count = 2;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("episode config validation", "[episode]") {
    EpisodeConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.resolved_goal() == 25);
    CHECK(cfg.spacing() == Catch::Approx(0.5));
    // Tick length makes one edge take exactly ticks_per_edge ticks.
    CHECK(cfg.tick_duration() ==
          Catch::Approx(cfg.spacing() / (cfg.ego_speed * cfg.ticks_per_edge)));

    EpisodeConfig bad = cfg;
    bad.start = bad.resolved_goal();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.sensor_count = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.ego_speed = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.ticks_per_edge = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.goal = 99;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("episode scenario validation", "[episode]") {
    EpisodeConfig cfg = small_config();

    // A basis that cannot see the whole grid is rejected.
    Scenario narrow = acscp::default_scenario_for(cfg);
    narrow.basis.widths = Eigen::VectorXd::Constant(4, 1e-4);
    CHECK_THROWS_AS(EpisodeState(cfg, narrow), std::invalid_argument);

    // A negative initial field is rejected.
    Scenario negative = acscp::default_scenario_for(cfg);
    negative.initial.theta = Eigen::VectorXd::Constant(4, -2.0);
    CHECK_THROWS_AS(EpisodeState(cfg, negative), std::invalid_argument);

    Scenario mismatched = acscp::default_scenario_for(cfg);
    mismatched.initial.theta = Eigen::VectorXd::Ones(5);
    CHECK_THROWS_AS(EpisodeState(cfg, mismatched), std::invalid_argument);
}

TEST_CASE("episode runs to the goal and accounts its ticks", "[episode]") {
    EpisodeConfig cfg = small_config();
    EpisodeLog log = acscp::run_episode(cfg);

    REQUIRE(log.summary.reached_goal);
    REQUIRE_FALSE(log.traveled.empty());
    CHECK(log.traveled.front() == cfg.start);
    CHECK(log.traveled.back() == cfg.resolved_goal());
    acscp::GridWorld grid(cfg.half_width, cfg.side_count);
    CHECK(is_valid_path(grid, acscp::Path{log.traveled}));

    // One edge per ticks_per_edge ticks, plus the t = 0 sample.
    const long edges = static_cast<long>(log.traveled.size()) - 1;
    CHECK(log.summary.ticks == edges * cfg.ticks_per_edge);
    CHECK(static_cast<long>(log.ticks.size()) == log.summary.ticks + 1);
    CHECK(log.summary.duration ==
          Catch::Approx(log.summary.ticks * cfg.tick_duration()));

    // Trapezoid accumulation over the tick samples reproduces the summary.
    double incurred = 0.0;
    for (std::size_t i = 1; i < log.ticks.size(); ++i)
        incurred += 0.5 * (log.ticks[i - 1].integrand + log.ticks[i].integrand) *
                    cfg.tick_duration();
    CHECK(log.summary.incurred == Catch::Approx(incurred).epsilon(1e-12));

    // Measurement accounting: S counts arrivals, U distinct vertices.
    CHECK(log.summary.measurement_count == static_cast<long>(log.arrivals.size()));
    std::set<VertexId> distinct;
    for (const auto& a : log.arrivals) distinct.insert(a.vertex);
    CHECK(log.summary.distinct_vertices == static_cast<long>(distinct.size()));
    CHECK(log.summary.distinct_vertices <= log.summary.measurement_count);
    // The initial joint measurement contributes one arrival per sensor.
    long initial = 0;
    for (const auto& a : log.arrivals)
        if (a.tick == 0) ++initial;
    CHECK(initial == cfg.sensor_count);

    // Bookending snapshots.
    REQUIRE(log.replans.size() >= 2);
    CHECK(log.replans.front().kind == RecordKind::prior);
    CHECK(log.replans.back().kind == RecordKind::terminal);
    // The prior belief snapshot shows the uninformed covariance.
    CHECK(log.replans.front().cov_trace ==
          Catch::Approx(cfg.chi * cfg.n_params));
}

TEST_CASE("episode stepping preserves plan invariants", "[episode]") {
    EpisodeConfig cfg = small_config();
    EpisodeState state(cfg, acscp::default_scenario_for(cfg));

    acscp::GridWorld grid(cfg.half_width, cfg.side_count);
    int steps = 0;
    while (!state.finished() && steps < 5000) {
        REQUIRE_FALSE(state.future().empty());
        CHECK(state.future().front() == state.target());
        CHECK(state.future().back() == cfg.resolved_goal());
        CHECK(grid.adjacent(state.reached().back(), state.target()));
        // Sensor assignments stay distinct.
        std::set<VertexId> assigned;
        for (const auto& s : state.sensors()) assigned.insert(s.assigned);
        CHECK(assigned.size() == state.sensors().size());
        state.step_tick();
        ++steps;
    }
    REQUIRE(state.finished());
    CHECK(state.reached().back() == cfg.resolved_goal());
    CHECK_THROWS_AS(state.step_tick(), std::logic_error);
}

TEST_CASE("episode determinism", "[episode]") {
    EpisodeConfig cfg = small_config();
    EpisodeLog a = acscp::run_episode(cfg);
    EpisodeLog b = acscp::run_episode(cfg);

    CHECK(a.traveled == b.traveled);
    CHECK(a.summary.ticks == b.summary.ticks);
    CHECK(a.summary.incurred == b.summary.incurred);
    REQUIRE(a.replans.size() == b.replans.size());
    for (std::size_t i = 0; i < a.replans.size(); ++i) {
        CHECK(a.replans[i].chosen_vertex == b.replans[i].chosen_vertex);
        CHECK(a.replans[i].cov_trace == b.replans[i].cov_trace);
        CHECK((a.replans[i].theta_hat - b.replans[i].theta_hat).norm() == 0.0);
    }
    REQUIRE(a.arrivals.size() == b.arrivals.size());
    for (std::size_t i = 0; i < a.arrivals.size(); ++i)
        CHECK(a.arrivals[i].measured == b.arrivals[i].measured);

    // The explicit-scenario overload agrees with the default one.
    EpisodeLog c = acscp::run_episode(cfg, acscp::default_scenario_for(cfg));
    CHECK(c.traveled == a.traveled);
    CHECK(c.summary.incurred == a.summary.incurred);

    EpisodeConfig other = cfg;
    other.seed = 12;
    EpisodeLog d = acscp::run_episode(other);
    CHECK((d.summary.incurred != a.summary.incurred || d.traveled != a.traveled));
}

TEST_CASE("sensor arrivals respect travel time", "[episode]") {
    EpisodeConfig cfg = small_config();
    EpisodeLog log = acscp::run_episode(cfg);
    acscp::GridWorld grid(cfg.half_width, cfg.side_count);

    // Walk the replan records per sensor: each accepted assignment must not
    // produce an arrival earlier than the distance over speed allows.
    std::vector<long> last_tick(static_cast<std::size_t>(cfg.sensor_count), 0);
    std::vector<VertexId> last_vertex(static_cast<std::size_t>(cfg.sensor_count), 0);
    for (const auto& a : log.arrivals) {
        if (a.tick == 0) {
            last_vertex[static_cast<std::size_t>(a.sensor)] = a.vertex;
            continue;
        }
        const std::size_t j = static_cast<std::size_t>(a.sensor);
        REQUIRE(last_vertex[j] != 0);
        const double trip = (grid.coord(a.vertex) - grid.coord(last_vertex[j])).norm();
        const double per_tick = cfg.sensor_speed * cfg.tick_duration();
        const long min_ticks = static_cast<long>(
            std::floor(trip / per_tick - 1e-9));
        CHECK(a.tick - last_tick[j] >= min_ticks);
        last_tick[j] = a.tick;
        last_vertex[j] = a.vertex;
    }
}

TEST_CASE("light detail drops parameter vectors", "[episode]") {
    EpisodeConfig cfg = small_config();
    cfg.log_detail = LogDetail::light;
    EpisodeLog log = acscp::run_episode(cfg);
    for (const auto& rec : log.replans) {
        CHECK(rec.theta_hat.size() == 0);
        CHECK(rec.theta_true.size() == 0);
    }
    // Numbers are unaffected by the logging detail.
    EpisodeConfig full = small_config();
    EpisodeLog ref = acscp::run_episode(full);
    CHECK(log.traveled == ref.traveled);
    CHECK(log.summary.incurred == ref.summary.incurred);
}

TEST_CASE("tick budget is enforced", "[episode]") {
    EpisodeConfig cfg = small_config();
    cfg.max_ticks = 5;
    CHECK_THROWS_AS(acscp::run_episode(cfg), std::runtime_error);
}

TEST_CASE("replan records carry consistent context", "[episode]") {
    EpisodeConfig cfg = small_config();
    EpisodeLog log = acscp::run_episode(cfg);
    acscp::GridWorld grid(cfg.half_width, cfg.side_count);

    for (const auto& rec : log.replans) {
        if (rec.kind != RecordKind::replan) continue;
        REQUIRE_FALSE(rec.future.empty());
        CHECK(rec.future.back() == cfg.resolved_goal());
        REQUIRE(rec.committed >= 1);
        REQUIRE(rec.committed <= static_cast<long>(log.traveled.size()));
        // The walk from the last committed vertex through the plan is valid.
        acscp::Path context;
        context.vertices.push_back(
            log.traveled[static_cast<std::size_t>(rec.committed - 1)]);
        context.vertices.insert(context.vertices.end(), rec.future.begin(),
                                rec.future.end());
        if (context.vertices.size() > 1) CHECK(is_valid_path(grid, context));
        // The chosen vertex was free when the decision was made.
        CHECK(std::find(rec.sensor_config.begin(), rec.sensor_config.end(),
                        rec.chosen_vertex) == rec.sensor_config.end());
        CHECK(rec.chosen_crmi >= 0.0);
        CHECK(rec.path_variance >= 0.0);
    }
}
