#include "fdlab/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fdlab/errors.hpp"
#include "fdlab/numfmt.hpp"
#include "fdlab/parallel.hpp"
#include "fdlab/report_io.hpp"
#include "fdlab/rng.hpp"

namespace fdlab {

namespace {

constexpr const char* kToolVersion = "1.0.0";

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + path.string());
    out << text;
}

void write_trajectory_file(const fs::path& path, const Trajectory& traj) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + path.string());
    write_trajectory_csv(traj, out);
}

// Collects the emitted-file index and timings; written last so that every
// output file is listed exactly once.
struct ManifestBuilder {
    nlohmann::ordered_json files = nlohmann::ordered_json::array();
    nlohmann::ordered_json timings = nlohmann::ordered_json::object();

    void add_file(const fs::path& path, const std::string& rel_name) {
        nlohmann::ordered_json entry;
        entry["name"] = rel_name;
        entry["bytes"] = static_cast<std::uint64_t>(fs::file_size(path));
        files.push_back(std::move(entry));
    }

    void write(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg,
               int jobs, double total_ms) {
        timings["total_ms"] = total_ms;
        nlohmann::ordered_json m;
        m["command"] = command;
        m["tool_version"] = kToolVersion;
        m["config_hash"] = "fnv1a64:" + hash_hex(fnv1a64(render_toml(cfg)));
        m["master_seed"] = cfg.master_seed;
        m["jobs"] = jobs;
        m["files"] = std::move(files);
        m["timings"] = std::move(timings);
        write_text_file(dir / "manifest.json", m.dump(2) + "\n");
    }
};

struct MethodOutcome {
    double train_loss = 0.0;
    double l_id = 0.0;
    double l_ood_min = 0.0;
    double l_ood_terminal = 0.0;
    bool converged = false;
};

MethodOutcome summarize(const Trajectory& traj) {
    MethodOutcome o;
    const auto& term = traj.terminal();
    o.train_loss = term.metrics.train_loss;
    o.l_id = term.metrics.l_id;
    o.l_ood_terminal = term.metrics.l_ood;
    o.l_ood_min = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.samples) o.l_ood_min = std::min(o.l_ood_min, s.metrics.l_ood);
    o.converged = traj.converged;
    return o;
}

Trajectory run_method(Method method, const ProblemInstance& inst,
                      const IntegratorConfig& icfg) {
    switch (method) {
        case Method::kFineTune: return integrate_fine_tuning(inst, icfg);
        case Method::kLinearProbe: return lp_flow(inst, icfg);
        case Method::kLpThenFineTune: return run_lpft(inst, icfg);
    }
    throw ConfigError("unknown method");
}

void reject_ft_with_lp_head(const ExperimentConfig& cfg) {
    for (Method m : cfg.methods)
        if (m == Method::kFineTune && cfg.instance.head_mode == HeadMode::kLp)
            throw ConfigError(
                "head_mode \"lp\" has no numeric head for method FT; use LPFT or another head");
}

InstanceConfig sweep_point(const ExperimentConfig& cfg, double value) {
    InstanceConfig inst = cfg.instance;
    const std::string& p = cfg.sweep.parameter;
    auto as_index = [&](const char* name) {
        if (!(value >= 1.0) || value != std::floor(value))
            throw ConfigError(std::string("sweep over '") + name +
                              "' needs positive integer values");
        return static_cast<Eigen::Index>(value);
    };
    if (p == "eps") {
        if (!(value >= 0.0)) throw ConfigError("sweep over 'eps' needs nonnegative values");
        inst.eps = value;
    } else if (p == "w_norm") {
        if (!(value > 0.0)) throw ConfigError("sweep over 'w_norm' needs positive values");
        inst.w_norm = value;
    } else if (p == "head_sigma_sq") {
        if (!(value > 0.0))
            throw ConfigError("sweep over 'head_sigma_sq' needs positive values");
        inst.head_sigma_sq = value;
    } else if (p == "d") {
        inst.d = as_index("d");
    } else if (p == "k") {
        inst.k = as_index("k");
    } else if (p == "m") {
        inst.m = as_index("m");
    } else if (p == "n") {
        inst.n = as_index("n");
    } else {
        throw ConfigError("unknown sweep parameter '" + p + "'");
    }
    return inst;
}

std::string value_dir_name(double value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "value_%g", value);
    return buf;
}

// Runs the listed suites, writing one JSON report each; returns true iff all
// of them pass.
bool run_suites_into(const std::vector<ResultId>& ids, const ExperimentConfig& cfg, int jobs,
                     ManifestBuilder& manifest, std::vector<TheoremReport>& reports,
                     std::ostream& out) {
    SuiteContext ctx{cfg.verify, cfg.integrator, cfg.instance, jobs};
    bool ok = true;
    for (ResultId id : ids) {
        auto suite_start = Clock::now();
        TheoremReport report = run_suite(id, ctx);
        double elapsed = ms_since(suite_start);
        manifest.timings[result_id_name(id)] = elapsed;
        std::string name = std::string("report_") + result_id_name(id) + ".json";
        fs::path path = fs::path(cfg.output_dir) / name;
        write_text_file(path, report_to_json(report).dump(2) + "\n");
        manifest.add_file(path, name);
        out << result_id_name(id) << " " << (report.pass ? "PASS" : "FAIL") << " ("
            << format_g17(elapsed / 1000.0) << " s)\n";
        ok = ok && report.pass;
        reports.push_back(std::move(report));
    }
    return ok;
}

std::vector<ResultId> expand_suites(const std::vector<std::string>& names) {
    std::vector<ResultId> ids;
    for (const auto& name : names) {
        if (name == "all") return all_result_ids();
        ids.push_back(result_id_from_name(name));
    }
    return ids;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

int run_experiment(const ExperimentConfig& cfg, int jobs, std::ostream& out) {
    auto t0 = Clock::now();
    reject_ft_with_lp_head(cfg);
    fs::create_directories(cfg.output_dir);
    ManifestBuilder manifest;

    struct Row {
        int instance;
        Method method;
        MethodOutcome outcome;
        std::string file;
    };
    const int n_methods = static_cast<int>(cfg.methods.size());
    std::vector<Row> rows(static_cast<std::size_t>(cfg.instance_count * n_methods));

    auto traj_start = Clock::now();
    parallel_for(cfg.instance_count, jobs, [&](int i) {
        InstanceConfig icfg_inst = cfg.instance;
        icfg_inst.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(i));
        ProblemInstance inst = build_instance(icfg_inst);
        for (int j = 0; j < n_methods; ++j) {
            Method method = cfg.methods[static_cast<std::size_t>(j)];
            Trajectory traj = run_method(method, inst, cfg.integrator);
            std::string name = std::string("trajectory_") + method_name(method) + "_" +
                               std::to_string(i) + ".csv";
            write_trajectory_file(fs::path(cfg.output_dir) / name, traj);
            rows[static_cast<std::size_t>(i * n_methods + j)] =
                Row{i, method, summarize(traj), name};
        }
    });
    manifest.timings["trajectories_ms"] = ms_since(traj_start);

    std::ostringstream md;
    md << "# Run summary\n\n";
    md << "Master seed: " << cfg.master_seed << "\n\n";
    md << "| instance | method | converged | train_loss | l_id | l_ood_min | l_ood_terminal |\n";
    md << "|---:|:---|:---|---:|---:|---:|---:|\n";
    for (const auto& row : rows) {
        const auto& o = row.outcome;
        md << "| " << row.instance << " | " << method_name(row.method) << " | "
           << (o.converged ? "yes" : "no") << " | " << format_g17(o.train_loss) << " | "
           << format_g17(o.l_id) << " | " << format_g17(o.l_ood_min) << " | "
           << format_g17(o.l_ood_terminal) << " |\n";
        out << "instance " << row.instance << " " << method_name(row.method)
            << (o.converged ? " converged" : " did not meet the loss criterion")
            << ", terminal OOD loss " << format_g17(o.l_ood_terminal) << "\n";
    }
    for (const auto& row : rows) manifest.add_file(fs::path(cfg.output_dir) / row.file, row.file);

    bool checks_ok = true;
    std::vector<TheoremReport> reports;
    if (!cfg.suites.empty()) {
        checks_ok = run_suites_into(expand_suites(cfg.suites), cfg, jobs, manifest, reports, out);
        md << "\n## Verification\n\n```\n" << summary_table(reports) << "```\n";
    }
    write_text_file(fs::path(cfg.output_dir) / "summary.md", md.str());
    manifest.add_file(fs::path(cfg.output_dir) / "summary.md", "summary.md");
    manifest.write(cfg.output_dir, "run", cfg, jobs, ms_since(t0));
    out << "wrote " << rows.size() << " trajectories to " << cfg.output_dir << "\n";
    return checks_ok ? 0 : 1;
}

int run_sweep(const ExperimentConfig& cfg, int jobs, std::ostream& out) {
    auto t0 = Clock::now();
    reject_ft_with_lp_head(cfg);

    // Validate every grid point up front so a bad value fails fast instead of
    // aborting a half-finished sweep.
    std::set<std::string> dir_names;
    for (double value : cfg.sweep.values) {
        (void)sweep_point(cfg, value);
        if (!dir_names.insert(value_dir_name(value)).second)
            throw ConfigError("sweep.values contains duplicate value " + value_dir_name(value));
    }

    fs::create_directories(cfg.output_dir);
    const int n_values = static_cast<int>(cfg.sweep.values.size());
    const int n_seeds = cfg.sweep.seeds;
    const int n_methods = static_cast<int>(cfg.methods.size());
    for (int vi = 0; vi < n_values; ++vi)
        fs::create_directories(fs::path(cfg.output_dir) /
                               value_dir_name(cfg.sweep.values[static_cast<std::size_t>(vi)]));

    std::vector<MethodOutcome> outcomes(
        static_cast<std::size_t>(n_values * n_seeds * n_methods));
    std::vector<std::string> rel_files(outcomes.size());

    parallel_for(n_values * n_seeds, jobs, [&](int flat) {
        int vi = flat / n_seeds;
        int si = flat % n_seeds;
        double value = cfg.sweep.values[static_cast<std::size_t>(vi)];
        InstanceConfig icfg_inst = sweep_point(cfg, value);
        icfg_inst.seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(si));
        ProblemInstance inst = build_instance(icfg_inst);
        for (int mi = 0; mi < n_methods; ++mi) {
            Method method = cfg.methods[static_cast<std::size_t>(mi)];
            Trajectory traj = run_method(method, inst, cfg.integrator);
            std::string rel = value_dir_name(value) + std::string("/trajectory_") +
                              method_name(method) + "_" + std::to_string(si) + ".csv";
            write_trajectory_file(fs::path(cfg.output_dir) / rel, traj);
            std::size_t slot = static_cast<std::size_t>(flat * n_methods + mi);
            outcomes[slot] = summarize(traj);
            rel_files[slot] = rel;
        }
    });

    std::ostringstream csv;
    csv << "sweep_value,seed,method,l_id,l_ood_min,l_ood_terminal\n";
    for (int vi = 0; vi < n_values; ++vi)
        for (int si = 0; si < n_seeds; ++si)
            for (int mi = 0; mi < n_methods; ++mi) {
                const auto& o =
                    outcomes[static_cast<std::size_t>(((vi * n_seeds) + si) * n_methods + mi)];
                csv << format_g17(cfg.sweep.values[static_cast<std::size_t>(vi)]) << ',' << si
                    << ',' << method_name(cfg.methods[static_cast<std::size_t>(mi)]) << ','
                    << format_g17(o.l_id) << ',' << format_g17(o.l_ood_min) << ','
                    << format_g17(o.l_ood_terminal) << '\n';
            }
    fs::path csv_path = fs::path(cfg.output_dir) / "sweep_summary.csv";
    write_text_file(csv_path, csv.str());
    out << "swept " << cfg.sweep.parameter << " over " << n_values << " values x " << n_seeds
        << " seeds x " << n_methods << " methods\n";

    ManifestBuilder manifest;
    for (const auto& rel : rel_files) manifest.add_file(fs::path(cfg.output_dir) / rel, rel);
    manifest.add_file(csv_path, "sweep_summary.csv");
    manifest.write(cfg.output_dir, "sweep", cfg, jobs, ms_since(t0));
    return 0;
}

int run_verify(const ExperimentConfig& cfg, const std::vector<std::string>& suites, int jobs,
               std::ostream& out) {
    auto t0 = Clock::now();
    std::vector<ResultId> ids =
        suites.empty() ? all_result_ids() : expand_suites(suites);
    fs::create_directories(cfg.output_dir);
    ManifestBuilder manifest;
    std::vector<TheoremReport> reports;
    bool ok = run_suites_into(ids, cfg, jobs, manifest, reports, out);
    manifest.write(cfg.output_dir, "verify", cfg, jobs, ms_since(t0));
    out << "\n" << summary_table(reports);
    return ok ? 0 : 1;
}

}  // namespace fdlab
