#ifndef ACSCP_CONFIG_HPP
#define ACSCP_CONFIG_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "acscp/episode.hpp"

namespace acscp {

/// Shortest round-trip decimal form of a double; used everywhere a numeric
/// value is written to disk so identical runs serialize identically.
inline std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "grid.half_width",
        "grid.side_count",
        "threat.N_P",
        "threat.sigma_P",
        "threat.theta_max",
        "threat.coverage_floor",
        "dynamics.rho",
        "sensors.count",
        "sensors.speed",
        "ego.speed",
        "ego.start",
        "ego.goal",
        "noise.sigma_R",
        "noise.chi",
        "reward.gamma",
        "reward.alpha_mode",
        "crmi.horizon",
        "plan.mode",
        "run.seed",
        "run.tick_per_edge",
        "run.max_ticks",
        "run.log_detail",
        "benchmark.time_varying",
        "experiment.schemes",
        "experiment.ratios",
        "experiment.seeds",
        "experiment.reference_ratio",
        "experiment.workers",
    };
    return keys;
}

}  // namespace detail

/// Flat key = value configuration. One assignment per line, '#' starts a
/// comment, keys must come from the documented registry and may not repeat
/// within a file.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string text = detail::trim(line);
            if (text.empty()) continue;
            const auto eq = text.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": expected key = value");
            const std::string key = detail::trim(text.substr(0, eq));
            const std::string value = detail::trim(text.substr(eq + 1));
            if (key.empty() || value.empty())
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": empty key or value");
            if (cfg.values_.count(key))
                throw std::invalid_argument("config: duplicate key '" + key + "'");
            cfg.set(key, value);
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
        return parse(in);
    }

    void set(const std::string& key, const std::string& value) {
        if (!detail::known_keys().count(key))
            throw std::invalid_argument("config: unknown key '" + key + "'");
        values_[key] = value;
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_double(key, it->second);
    }

    long get_long(const std::string& key, long fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_integer<long>(key, it->second);
    }

    int get_int(const std::string& key, int fallback) const {
        return static_cast<int>(get_long(key, fallback));
    }

    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return parse_integer<std::uint64_t>(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        const std::string& v = it->second;
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw std::invalid_argument("config: key '" + key + "' expects a boolean");
    }

    static double parse_double(const std::string& key, const std::string& text) {
        try {
            std::size_t used = 0;
            const double out = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument("");
            return out;
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key '" + key + "' has non-numeric value '" +
                                        text + "'");
        }
    }

    template <typename T>
    static T parse_integer(const std::string& key, const std::string& text) {
        T out{};
        const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
        if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
            throw std::invalid_argument("config: key '" + key + "' has non-integer value '" +
                                        text + "'");
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

inline RewardWeights reward_weights_from(const std::string& alpha_mode, double gamma) {
    RewardWeights w;
    w.gamma = gamma;
    if (alpha_mode == "auto") {
        w.alpha_mode = AlphaMode::automatic;
    } else if (alpha_mode == "zero") {
        w.alpha_mode = AlphaMode::zero;
    } else {
        w.alpha_mode = AlphaMode::fixed;
        w.alpha_value = KeyValueConfig::parse_double("reward.alpha_mode", alpha_mode);
    }
    w.validate();
    return w;
}

/// Builds a validated episode configuration; unset keys keep the standard
/// defaults.
inline EpisodeConfig episode_config_from(const KeyValueConfig& kv) {
    EpisodeConfig cfg;
    cfg.half_width = kv.get_double("grid.half_width", cfg.half_width);
    cfg.side_count = kv.get_int("grid.side_count", cfg.side_count);
    cfg.n_params = kv.get_int("threat.N_P", cfg.n_params);
    cfg.sigma_p = kv.get_double("threat.sigma_P", cfg.sigma_p);
    cfg.theta_max = kv.get_double("threat.theta_max", cfg.theta_max);
    cfg.coverage_floor = kv.get_double("threat.coverage_floor", cfg.coverage_floor);
    cfg.rho = kv.get_double("dynamics.rho", cfg.rho);
    cfg.sensor_count = kv.get_int("sensors.count", cfg.sensor_count);
    cfg.sensor_speed = kv.get_double("sensors.speed", cfg.sensor_speed);
    cfg.ego_speed = kv.get_double("ego.speed", cfg.ego_speed);
    cfg.start = kv.get_int("ego.start", cfg.start);
    cfg.goal = kv.get_int("ego.goal", cfg.goal);
    cfg.sigma_r = kv.get_double("noise.sigma_R", cfg.sigma_r);
    cfg.chi = kv.get_double("noise.chi", cfg.chi);
    cfg.reward = reward_weights_from(kv.get_string("reward.alpha_mode", "auto"),
                                     kv.get_double("reward.gamma", cfg.reward.gamma));

    const std::string horizon = kv.get_string("crmi.horizon", "one_step");
    if (horizon == "one_step") cfg.crmi_horizon = CrmiHorizon::one_step;
    else if (horizon == "travel_time") cfg.crmi_horizon = CrmiHorizon::travel_time;
    else throw std::invalid_argument("config: crmi.horizon must be one_step or travel_time");

    const std::string mode = kv.get_string("plan.mode", "frozen");
    if (mode == "frozen") cfg.plan_mode = PlanningMode::frozen;
    else if (mode == "propagated") cfg.plan_mode = PlanningMode::propagated;
    else throw std::invalid_argument("config: plan.mode must be frozen or propagated");

    cfg.seed = kv.get_uint64("run.seed", cfg.seed);
    cfg.ticks_per_edge = kv.get_int("run.tick_per_edge", cfg.ticks_per_edge);
    cfg.max_ticks = kv.get_long("run.max_ticks", cfg.max_ticks);

    const std::string detail = kv.get_string("run.log_detail", "full");
    if (detail == "full") cfg.log_detail = LogDetail::full;
    else if (detail == "light") cfg.log_detail = LogDetail::light;
    else throw std::invalid_argument("config: run.log_detail must be full or light");

    cfg.benchmark_time_varying =
        kv.get_bool("benchmark.time_varying", cfg.benchmark_time_varying);
    cfg.validate();
    return cfg;
}

/// Flat echo of an episode configuration using the documented keys, in
/// registry order.
inline std::vector<std::pair<std::string, std::string>> config_to_entries(
    const EpisodeConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("grid.half_width", format_double(cfg.half_width));
    out.emplace_back("grid.side_count", std::to_string(cfg.side_count));
    out.emplace_back("threat.N_P", std::to_string(cfg.n_params));
    out.emplace_back("threat.sigma_P", format_double(cfg.sigma_p));
    out.emplace_back("threat.theta_max", format_double(cfg.theta_max));
    out.emplace_back("threat.coverage_floor", format_double(cfg.coverage_floor));
    out.emplace_back("dynamics.rho", format_double(cfg.rho));
    out.emplace_back("sensors.count", std::to_string(cfg.sensor_count));
    out.emplace_back("sensors.speed", format_double(cfg.sensor_speed));
    out.emplace_back("ego.speed", format_double(cfg.ego_speed));
    out.emplace_back("ego.start", std::to_string(cfg.start));
    out.emplace_back("ego.goal", std::to_string(cfg.goal));
    out.emplace_back("noise.sigma_R", format_double(cfg.sigma_r));
    out.emplace_back("noise.chi", format_double(cfg.chi));
    out.emplace_back("reward.gamma", format_double(cfg.reward.gamma));
    switch (cfg.reward.alpha_mode) {
        case AlphaMode::automatic: out.emplace_back("reward.alpha_mode", "auto"); break;
        case AlphaMode::zero: out.emplace_back("reward.alpha_mode", "zero"); break;
        case AlphaMode::fixed:
            out.emplace_back("reward.alpha_mode", format_double(cfg.reward.alpha_value));
            break;
    }
    out.emplace_back("crmi.horizon", cfg.crmi_horizon == CrmiHorizon::one_step
                                         ? "one_step"
                                         : "travel_time");
    out.emplace_back("plan.mode",
                     cfg.plan_mode == PlanningMode::frozen ? "frozen" : "propagated");
    out.emplace_back("run.seed", std::to_string(cfg.seed));
    out.emplace_back("run.tick_per_edge", std::to_string(cfg.ticks_per_edge));
    out.emplace_back("run.max_ticks", std::to_string(cfg.max_ticks));
    out.emplace_back("run.log_detail",
                     cfg.log_detail == LogDetail::full ? "full" : "light");
    out.emplace_back("benchmark.time_varying",
                     cfg.benchmark_time_varying ? "true" : "false");
    return out;
}

/// Inverse of config_to_entries.
inline EpisodeConfig episode_config_from_entries(
    const std::vector<std::pair<std::string, std::string>>& entries) {
    KeyValueConfig kv;
    for (const auto& [key, value] : entries) kv.set(key, value);
    return episode_config_from(kv);
}

namespace detail {

inline std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, sep)) {
        const std::string t = trim(token);
        if (!t.empty()) parts.push_back(t);
    }
    return parts;
}

}  // namespace detail

/// One reward configuration inside an experiment, named for reporting.
struct SchemeSpec {
    std::string name;
    RewardWeights weights;
};

/// Seed list syntax: comma-separated values, where each item is either a
/// single seed or an inclusive range a..b.
inline std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    for (const std::string& item : detail::split(text, ',')) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            seeds.push_back(KeyValueConfig::parse_integer<std::uint64_t>("experiment.seeds", item));
            continue;
        }
        const std::uint64_t lo = KeyValueConfig::parse_integer<std::uint64_t>(
            "experiment.seeds", item.substr(0, dots));
        const std::uint64_t hi = KeyValueConfig::parse_integer<std::uint64_t>(
            "experiment.seeds", item.substr(dots + 2));
        if (hi < lo)
            throw std::invalid_argument("config: experiment.seeds range is reversed");
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
    }
    if (seeds.empty())
        throw std::invalid_argument("config: experiment.seeds is empty");
    return seeds;
}

/// Scheme list syntax: comma-separated name:alpha_mode:gamma triples, e.g.
/// "acscp:auto:1, nocost:zero:1, mixed:auto:0.5".
inline std::vector<SchemeSpec> parse_scheme_list(const std::string& text) {
    std::vector<SchemeSpec> schemes;
    std::set<std::string> names;
    for (const std::string& item : detail::split(text, ',')) {
        const std::vector<std::string> parts = detail::split(item, ':');
        if (parts.size() != 3)
            throw std::invalid_argument("config: scheme '" + item +
                                        "' must be name:alpha_mode:gamma");
        SchemeSpec scheme;
        scheme.name = parts[0];
        scheme.weights = reward_weights_from(
            parts[1], KeyValueConfig::parse_double("experiment.schemes", parts[2]));
        if (!names.insert(scheme.name).second)
            throw std::invalid_argument("config: duplicate scheme name '" + scheme.name + "'");
        schemes.push_back(std::move(scheme));
    }
    if (schemes.empty())
        throw std::invalid_argument("config: experiment.schemes is empty");
    return schemes;
}

/// Full sweep description: a base episode configuration crossed with
/// schemes, sensor/ego speed ratios and seeds.
struct ExperimentSpec {
    EpisodeConfig base;
    std::vector<SchemeSpec> schemes;
    std::vector<double> ratios;
    std::vector<std::uint64_t> seeds;
    double reference_ratio = 5.0;
    int workers = 1;

    void validate() const {
        base.validate();
        if (schemes.empty()) throw std::invalid_argument("ExperimentSpec: no schemes");
        if (ratios.empty()) throw std::invalid_argument("ExperimentSpec: no ratios");
        for (double r : ratios)
            if (!(r > 0.0))
                throw std::invalid_argument("ExperimentSpec: ratios must be positive");
        if (seeds.empty()) throw std::invalid_argument("ExperimentSpec: no seeds");
        if (!(reference_ratio > 0.0))
            throw std::invalid_argument("ExperimentSpec: reference_ratio must be positive");
        if (workers < 1)
            throw std::invalid_argument("ExperimentSpec: workers must be >= 1");
    }
};

inline ExperimentSpec experiment_spec_from(const KeyValueConfig& kv) {
    ExperimentSpec spec;
    spec.base = episode_config_from(kv);
    spec.schemes = parse_scheme_list(
        kv.get_string("experiment.schemes", "acscp:auto:1"));
    if (kv.has("experiment.ratios")) {
        for (const std::string& item :
             detail::split(kv.get_string("experiment.ratios", ""), ','))
            spec.ratios.push_back(KeyValueConfig::parse_double("experiment.ratios", item));
    } else {
        spec.ratios.push_back(spec.base.sensor_speed / spec.base.ego_speed);
    }
    if (kv.has("experiment.seeds"))
        spec.seeds = parse_seed_list(kv.get_string("experiment.seeds", ""));
    else
        spec.seeds.push_back(spec.base.seed);
    spec.reference_ratio = kv.get_double("experiment.reference_ratio", spec.ratios.front());
    spec.workers = kv.get_int("experiment.workers", 1);
    spec.validate();
    return spec;
}

}  // namespace acscp

#endif  // ACSCP_CONFIG_HPP
