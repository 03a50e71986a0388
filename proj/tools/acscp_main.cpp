// Command-line front end: run experiment sweeps, export field snapshots
// from episode logs, and audit logs for internal consistency.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "acscp/config.hpp"
#include "acscp/harness.hpp"

namespace {

int run_command(const std::string& spec_path, const std::string& out_dir,
                const std::vector<std::string>& overrides, bool no_logs) {
    acscp::KeyValueConfig kv = spec_path.empty()
                                   ? acscp::KeyValueConfig{}
                                   : acscp::KeyValueConfig::load(spec_path);
    for (const std::string& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + item + "'");
        kv.set(item.substr(0, eq), item.substr(eq + 1));
    }
    const acscp::ExperimentSpec spec = acscp::experiment_spec_from(kv);
    const acscp::ExperimentResult result =
        acscp::run_experiment(spec, out_dir, !no_logs && !out_dir.empty());
    std::cout << result.exposure_table << '\n'
              << result.efficiency_table << '\n'
              << result.episode_table;
    if (!out_dir.empty())
        std::cout << "\nwrote summary tables to " << out_dir << '\n';
    return 0;
}

int snapshot_command(const std::string& log_path, const std::vector<double>& times,
                     const std::string& out_dir) {
    const acscp::EpisodeLog log = acscp::read_episode_log(log_path);
    const std::vector<std::string> files =
        acscp::export_field_snapshots(log, times, out_dir);
    for (const std::string& f : files) std::cout << f << '\n';
    return 0;
}

int verify_command(const std::string& log_path, double tol) {
    const acscp::EpisodeLog log = acscp::read_episode_log(log_path);
    const acscp::VerifyResult result = acscp::verify_log(log, tol);
    if (result.ok) {
        std::cout << "ok: " << log_path << '\n';
        return 0;
    }
    for (const std::string& issue : result.issues)
        std::cout << "mismatch: " << issue << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"A-CSCP simulator: coupled sensor reconfiguration and path replanning"};
    app.require_subcommand(1);

    std::string spec_path, out_dir, log_path;
    std::vector<std::string> overrides;
    std::vector<double> times;
    bool no_logs = false;
    double tol = 1e-9;

    CLI::App* run = app.add_subcommand("run", "run an experiment sweep from a config file");
    run->add_option("spec", spec_path, "key = value config file (optional; defaults apply)");
    run->add_option("--out", out_dir, "directory for summary tables and episode logs");
    run->add_option("--set", overrides, "override a config key, e.g. --set run.seed=7")
        ->type_name("KEY=VALUE");
    run->add_flag("--no-logs", no_logs, "skip writing per-episode logs");

    CLI::App* snapshot =
        app.add_subcommand("snapshot", "export true/estimated field tables from a log");
    snapshot->add_option("--log", log_path, "episode log (json)")->required();
    snapshot->add_option("--time", times, "snapshot time(s), episode seconds")->required();
    snapshot->add_option("--out", out_dir, "output directory")->required();

    CLI::App* verify = app.add_subcommand("verify", "audit an episode log");
    verify->add_option("--log", log_path, "episode log (json)")->required();
    verify->add_option("--tol", tol, "comparison tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_command(spec_path, out_dir, overrides, no_logs);
        if (snapshot->parsed()) return snapshot_command(log_path, times, out_dir);
        if (verify->parsed()) return verify_command(log_path, tol);
    } catch (const std::invalid_argument& e) {
        const std::string what = e.what();
        const char* sep = what.rfind("config: ", 0) == 0 ? "" : "config: ";
        std::cerr << "error: " << sep << what << '\n';
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: runtime: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
