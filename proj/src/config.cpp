#include "fdlab/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "fdlab/errors.hpp"
#include "fdlab/numfmt.hpp"
#include "fdlab/toml.hpp"

namespace fdlab {

namespace {

const std::set<std::string> kKnownKeys = {
    "output_dir",           "master_seed",          "methods",
    "instance.count",       "instance.d",           "instance.k",
    "instance.m",           "instance.n",           "instance.eps",
    "instance.w_norm",      "instance.head_mode",   "instance.head_sigma_sq",
    "instance.sigma_mode",  "instance.sigma_diag",  "integrator.initial_step",
    "integrator.t_max",     "integrator.loss_tol",  "integrator.n_samples",
    "integrator.max_halvings", "integrator.growth", "verify.suites",
    "verify.n_instances",   "verify.n_mc_trials",   "verify.delta",
    "verify.eps_sweep",     "sweep.parameter",      "sweep.seeds",
    "sweep.values",
};

const std::set<std::string> kSweepParameters = {"eps", "n",      "m",
                                                "k",   "d",      "w_norm",
                                                "head_sigma_sq"};

long long require_positive_int(const toml::Document& doc, const std::string& key,
                               long long fallback) {
    if (!doc.contains(key)) return fallback;
    long long v = doc.get_int(key);
    if (v < 1) throw ConfigError("key '" + key + "' must be a positive integer");
    return v;
}

double require_nonnegative(const toml::Document& doc, const std::string& key,
                           double fallback) {
    if (!doc.contains(key)) return fallback;
    double v = doc.get_double(key);
    if (!(v >= 0.0)) throw ConfigError("key '" + key + "' must be nonnegative");
    return v;
}

double require_positive(const toml::Document& doc, const std::string& key, double fallback) {
    if (!doc.contains(key)) return fallback;
    double v = doc.get_double(key);
    if (!(v > 0.0)) throw ConfigError("key '" + key + "' must be positive");
    return v;
}

void validate_instance(const InstanceConfig& c) {
    if (c.k < 1) throw ConfigError("instance: requires k >= 1");
    if (!(c.k < c.m)) throw ConfigError("instance: requires k < m");
    if (!(c.m < c.d - c.k)) throw ConfigError("instance: requires m < d - k");
    if (!(c.n >= c.m)) throw ConfigError("instance: requires n >= m");
    if (!(c.eps >= 0.0)) throw ConfigError("instance: requires eps >= 0");
    if (!(c.w_norm > 0.0)) throw ConfigError("instance: requires w_norm > 0");
    if (!(c.head_sigma_sq > 0.0)) throw ConfigError("instance: requires head_sigma_sq > 0");
}

void validate_sweep_strictly_decreasing(const std::vector<double>& values,
                                        const std::string& key) {
    if (values.empty()) throw ConfigError("key '" + key + "' must be a nonempty array");
    for (double v : values)
        if (!(v > 0.0)) throw ConfigError("key '" + key + "' entries must be positive");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] < values[i - 1]))
            throw ConfigError("key '" + key + "' must be strictly decreasing");
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::kFineTune: return "FT";
        case Method::kLinearProbe: return "LP";
        case Method::kLpThenFineTune: return "LPFT";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "FT") return Method::kFineTune;
    if (name == "LP") return Method::kLinearProbe;
    if (name == "LPFT") return Method::kLpThenFineTune;
    throw ConfigError("unknown method '" + name + "' (expected FT, LP, or LPFT)");
}

ExperimentConfig load_config_text(const std::string& text) {
    toml::Document doc = toml::parse(text);
    for (const auto& key : doc.keys())
        if (!kKnownKeys.count(key)) throw ConfigError("unknown key '" + key + "'");

    ExperimentConfig cfg;
    if (doc.contains("output_dir")) cfg.output_dir = doc.get_string("output_dir");
    if (cfg.output_dir.empty()) throw ConfigError("key 'output_dir' must be nonempty");
    if (doc.contains("master_seed")) {
        long long s = doc.get_int("master_seed");
        if (s < 0) throw ConfigError("key 'master_seed' must be nonnegative");
        cfg.master_seed = static_cast<std::uint64_t>(s);
    }
    if (doc.contains("methods")) {
        cfg.methods.clear();
        for (const auto& name : doc.get_string_array("methods"))
            cfg.methods.push_back(method_from_name(name));
        if (cfg.methods.empty()) throw ConfigError("key 'methods' must be nonempty");
    }

    InstanceConfig& inst = cfg.instance;
    cfg.instance_count = static_cast<int>(require_positive_int(doc, "instance.count", 1));
    inst.d = static_cast<Eigen::Index>(require_positive_int(doc, "instance.d", inst.d));
    inst.k = static_cast<Eigen::Index>(require_positive_int(doc, "instance.k", inst.k));
    inst.m = static_cast<Eigen::Index>(require_positive_int(doc, "instance.m", inst.m));
    inst.n = static_cast<Eigen::Index>(require_positive_int(doc, "instance.n", inst.n));
    inst.eps = require_nonnegative(doc, "instance.eps", inst.eps);
    inst.w_norm = require_positive(doc, "instance.w_norm", inst.w_norm);
    inst.head_sigma_sq = require_positive(doc, "instance.head_sigma_sq", inst.head_sigma_sq);
    if (doc.contains("instance.head_mode")) {
        std::string mode = doc.get_string("instance.head_mode");
        if (mode == "zero") inst.head_mode = HeadMode::kZero;
        else if (mode == "gaussian") inst.head_mode = HeadMode::kGaussian;
        else if (mode == "lp") inst.head_mode = HeadMode::kLp;
        else throw ConfigError("key 'instance.head_mode': unknown mode '" + mode + "'");
    }
    if (doc.contains("instance.sigma_mode")) {
        std::string mode = doc.get_string("instance.sigma_mode");
        if (mode == "identity") inst.sigma_mode = SecondMomentMode::kIdentity;
        else if (mode == "diagonal") inst.sigma_mode = SecondMomentMode::kDiagonal;
        else throw ConfigError("key 'instance.sigma_mode': unknown mode '" + mode + "'");
    }
    if (doc.contains("instance.sigma_diag"))
        inst.sigma_diag = doc.get_double_array("instance.sigma_diag");
    if (inst.sigma_mode == SecondMomentMode::kDiagonal) {
        if (static_cast<Eigen::Index>(inst.sigma_diag.size()) != inst.d)
            throw ConfigError("instance.sigma_diag must have exactly d entries");
        for (double v : inst.sigma_diag)
            if (!(v > 0.0)) throw ConfigError("instance.sigma_diag entries must be positive");
    } else if (!inst.sigma_diag.empty()) {
        throw ConfigError("instance.sigma_diag requires sigma_mode = \"diagonal\"");
    }
    validate_instance(inst);

    IntegratorConfig& icfg = cfg.integrator;
    icfg.initial_step = require_nonnegative(doc, "integrator.initial_step", icfg.initial_step);
    icfg.t_max = require_positive(doc, "integrator.t_max", icfg.t_max);
    icfg.loss_tol = require_positive(doc, "integrator.loss_tol", icfg.loss_tol);
    icfg.n_samples = static_cast<int>(
        require_positive_int(doc, "integrator.n_samples", icfg.n_samples));
    if (icfg.n_samples < 2) throw ConfigError("key 'integrator.n_samples' must be >= 2");
    icfg.max_halvings = static_cast<int>(
        require_positive_int(doc, "integrator.max_halvings", icfg.max_halvings));
    icfg.growth = require_positive(doc, "integrator.growth", icfg.growth);
    if (!(icfg.growth >= 1.0)) throw ConfigError("key 'integrator.growth' must be >= 1");

    VerificationConfig& vcfg = cfg.verify;
    vcfg.n_instances = static_cast<int>(
        require_positive_int(doc, "verify.n_instances", vcfg.n_instances));
    vcfg.n_mc_trials = static_cast<int>(
        require_positive_int(doc, "verify.n_mc_trials", vcfg.n_mc_trials));
    if (doc.contains("verify.delta")) {
        vcfg.delta = doc.get_double("verify.delta");
        if (!(vcfg.delta > 0.0 && vcfg.delta < 1.0))
            throw ConfigError("key 'verify.delta' must lie in (0,1)");
    }
    if (doc.contains("verify.eps_sweep")) {
        vcfg.eps_sweep = doc.get_double_array("verify.eps_sweep");
        validate_sweep_strictly_decreasing(vcfg.eps_sweep, "verify.eps_sweep");
    }
    if (doc.contains("verify.suites")) {
        cfg.suites = doc.get_string_array("verify.suites");
        for (const auto& s : cfg.suites)
            if (s != "all") result_id_from_name(s);  // validates the name
    }

    SweepConfig& sw = cfg.sweep;
    if (doc.contains("sweep.parameter")) {
        sw.parameter = doc.get_string("sweep.parameter");
        if (!kSweepParameters.count(sw.parameter))
            throw ConfigError("key 'sweep.parameter': unknown parameter '" + sw.parameter + "'");
    }
    if (doc.contains("sweep.values")) {
        sw.values = doc.get_double_array("sweep.values");
        if (sw.values.empty()) throw ConfigError("key 'sweep.values' must be nonempty");
    }
    sw.seeds = static_cast<int>(require_positive_int(doc, "sweep.seeds", sw.seeds));

    cfg.instance.seed = cfg.master_seed;
    cfg.verify.seed = cfg.master_seed;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    if (path.empty()) return load_config_text(default_toml());
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config_text(buf.str());
}

void apply_env_seed(ExperimentConfig& cfg) {
    const char* env = std::getenv("FDLAB_SEED");
    if (!env) return;
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
        throw ConfigError(std::string("FDLAB_SEED is not a valid seed: '") + env + "'");
    set_master_seed(cfg, static_cast<std::uint64_t>(v));
}

void set_master_seed(ExperimentConfig& cfg, std::uint64_t seed) {
    cfg.master_seed = seed;
    cfg.instance.seed = seed;
    cfg.verify.seed = seed;
}

std::string render_toml(const ExperimentConfig& d) {
    std::ostringstream out;
    out << "output_dir = \"" << d.output_dir << "\"\n";
    out << "master_seed = " << d.master_seed << "\n";
    out << "methods = [";
    for (std::size_t i = 0; i < d.methods.size(); ++i)
        out << (i ? ", " : "") << '"' << method_name(d.methods[i]) << '"';
    out << "]\n";
    out << "\n[instance]\n";
    out << "count = " << d.instance_count << "\n";
    out << "d = " << d.instance.d << "\n";
    out << "k = " << d.instance.k << "\n";
    out << "m = " << d.instance.m << "\n";
    out << "n = " << d.instance.n << "\n";
    out << "eps = " << format_g17(d.instance.eps) << "\n";
    out << "w_norm = " << format_g17(d.instance.w_norm) << "\n";
    const char* head_mode = d.instance.head_mode == HeadMode::kZero       ? "zero"
                            : d.instance.head_mode == HeadMode::kGaussian ? "gaussian"
                                                                          : "lp";
    out << "head_mode = \"" << head_mode << "\"          # zero | gaussian | lp\n";
    out << "head_sigma_sq = " << format_g17(d.instance.head_sigma_sq) << "\n";
    bool diagonal = d.instance.sigma_mode == SecondMomentMode::kDiagonal;
    out << "sigma_mode = \"" << (diagonal ? "diagonal" : "identity")
        << "\"     # identity | diagonal (requires sigma_diag)\n";
    if (diagonal) {
        out << "sigma_diag = [";
        for (std::size_t i = 0; i < d.instance.sigma_diag.size(); ++i)
            out << (i ? ", " : "") << format_g17(d.instance.sigma_diag[i]);
        out << "]\n";
    }
    out << "\n[integrator]\n";
    out << "initial_step = " << format_g17(d.integrator.initial_step)
        << "              # 0 selects the curvature-scaled default\n";
    out << "t_max = " << format_g17(d.integrator.t_max) << "\n";
    out << "loss_tol = " << format_g17(d.integrator.loss_tol) << "\n";
    out << "n_samples = " << d.integrator.n_samples << "\n";
    out << "max_halvings = " << d.integrator.max_halvings << "\n";
    out << "growth = " << format_g17(d.integrator.growth) << "\n";
    out << "\n[verify]\n";
    out << "suites = [";
    for (std::size_t i = 0; i < d.suites.size(); ++i)
        out << (i ? ", " : "") << '"' << d.suites[i] << '"';
    out << "]\n";
    out << "n_instances = " << d.verify.n_instances << "\n";
    out << "n_mc_trials = " << d.verify.n_mc_trials << "\n";
    out << "delta = " << format_g17(d.verify.delta) << "\n";
    out << "eps_sweep = [";
    for (std::size_t i = 0; i < d.verify.eps_sweep.size(); ++i)
        out << (i ? ", " : "") << format_g17(d.verify.eps_sweep[i]);
    out << "]\n";
    out << "\n[sweep]\n";
    out << "parameter = \"" << d.sweep.parameter << "\"\n";
    out << "values = [";
    for (std::size_t i = 0; i < d.sweep.values.size(); ++i)
        out << (i ? ", " : "") << format_g17(d.sweep.values[i]);
    out << "]\n";
    out << "seeds = " << d.sweep.seeds << "\n";
    return out.str();
}

std::string default_toml() {
    return "# Experiment configuration (all keys shown with their defaults)\n" +
           render_toml(ExperimentConfig{});
}

}  // namespace fdlab
