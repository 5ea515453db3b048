#include "fdlab/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

#include <Eigen/Dense>

#include "fdlab/baselines.hpp"
#include "fdlab/errors.hpp"
#include "fdlab/parallel.hpp"

namespace fdlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Subspace rowspace(const FeatureExtractor& b) {
    return orthonormalize(b.entries.transpose());
}

double min_ood_over_samples(const Trajectory& traj) {
    double best = kInf;
    for (const auto& s : traj.samples) best = std::min(best, s.metrics.l_ood);
    return best;
}

double max_ood_over_samples(const Trajectory& traj) {
    double worst = 0.0;
    for (const auto& s : traj.samples) worst = std::max(worst, s.metrics.l_ood);
    return worst;
}

double sigma_min_eigenvalue(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

TheoremReport make_report(ResultId id, std::map<std::string, double> quantities,
                          std::string notes) {
    for (const auto& [key, value] : quantities)
        if (!std::isfinite(value))
            throw PreconditionViolated("report quantity '" + key + "' is not finite");
    TheoremReport rep{id, std::move(quantities), false, std::move(notes)};
    rep.pass = recompute_pass(id, rep.quantities);
    return rep;
}

double quantity(const std::map<std::string, double>& q, const std::string& key) {
    auto it = q.find(key);
    if (it == q.end())
        throw PreconditionViolated("report is missing quantity '" + key + "'");
    return it->second;
}

bool has_quantity(const std::map<std::string, double>& q, const std::string& key) {
    return q.count(key) != 0;
}

}  // namespace

const char* result_id_name(ResultId id) {
    switch (id) {
        case ResultId::kThm1: return "THM1";
        case ResultId::kThm2Ratio: return "THM2_RATIO";
        case ResultId::kThmGaussNonasymp: return "THM_GAUSS_NONASYMP";
        case ResultId::kPropId: return "PROP_ID";
        case ResultId::kPropLpft: return "PROP_LPFT";
        case ResultId::kPropLpPerfect: return "PROP_LP_PERFECT";
        case ResultId::kLemBalance: return "LEM_BALANCE";
        case ResultId::kLemFeatinv: return "LEM_FEATINV";
        case ResultId::kLemLpUpper: return "LEM_LP_UPPER";
        case ResultId::kLemAnglePerturb: return "LEM_ANGLE_PERTURB";
        case ResultId::kLemSubspaceAngle: return "LEM_SUBSPACE_ANGLE";
        case ResultId::kLemHeadAnticonc: return "LEM_HEAD_ANTICONC";
    }
    return "UNKNOWN";
}

std::vector<ResultId> all_result_ids() {
    return {ResultId::kThm1,          ResultId::kThm2Ratio,
            ResultId::kThmGaussNonasymp, ResultId::kPropId,
            ResultId::kPropLpft,      ResultId::kPropLpPerfect,
            ResultId::kLemBalance,    ResultId::kLemFeatinv,
            ResultId::kLemLpUpper,    ResultId::kLemAnglePerturb,
            ResultId::kLemSubspaceAngle, ResultId::kLemHeadAnticonc};
}

ResultId result_id_from_name(const std::string& name) {
    for (ResultId id : all_result_ids())
        if (name == result_id_name(id)) return id;
    throw ConfigError("unknown suite id: " + name);
}

bool recompute_pass(ResultId id, const std::map<std::string, double>& q) {
    switch (id) {
        case ResultId::kThm1: {
            if (has_quantity(q, "n_instances")) {
                if (quantity(q, "pass_rate") == 1.0) return true;
                double floor = quantity(q, "ratio_floor");
                return floor > 0.0 && quantity(q, "min_ratio") >= floor;
            }
            if (quantity(q, "rhs") <= 0.0) return true;  // bound asserts nothing
            return quantity(q, "min_sqrt_lood") >= quantity(q, "rhs");
        }
        case ResultId::kThm2Ratio: {
            int n = static_cast<int>(quantity(q, "n_eps"));
            double prev = kInf;
            for (int i = 0; i < n; ++i) {
                double r = quantity(q, "ratio_" + std::to_string(i));
                if (r >= prev) return false;
                prev = r;
            }
            return prev < quantity(q, "final_max");
        }
        case ResultId::kThmGaussNonasymp:
            return quantity(q, "win_fraction") >= quantity(q, "required_fraction");
        case ResultId::kPropId: {
            if (has_quantity(q, "n_instances"))
                return quantity(q, "n_pass") == quantity(q, "n_instances");
            double ft = quantity(q, "l_id_ft"), lp = quantity(q, "l_id_lp");
            return ft <= quantity(q, "ft_tol") && lp >= quantity(q, "lp_floor") && ft < lp;
        }
        case ResultId::kPropLpft: {
            bool frozen = quantity(q, "max_lpft_lood") <= quantity(q, "freeze_tol") &&
                          quantity(q, "max_param_move") <= quantity(q, "freeze_tol");
            double floor = quantity(q, "random_floor");
            double observed = quantity(q, "min_random_lood");
            // A nonpositive floor means no anchor has been recorded yet; fall
            // back to the qualitative claim that the loss never vanishes.
            return frozen && (floor > 0.0 ? observed >= floor : observed > 0.0);
        }
        case ResultId::kPropLpPerfect:
            return quantity(q, "max_lood") <= quantity(q, "tol");
        case ResultId::kLemBalance:
            return quantity(q, "max_drift") <= quantity(q, "budget");
        case ResultId::kLemFeatinv:
            return quantity(q, "max_drift") <= quantity(q, "tol");
        case ResultId::kLemLpUpper:
            return std::abs(quantity(q, "slope") - quantity(q, "slope_target")) <=
                   quantity(q, "slope_tol");
        case ResultId::kLemAnglePerturb:
            return quantity(q, "n_violations") == 0.0;
        case ResultId::kLemSubspaceAngle:
            return quantity(q, "failure_fraction") <= quantity(q, "fail_threshold") &&
                   quantity(q, "min_cangle") > quantity(q, "positivity_floor");
        case ResultId::kLemHeadAnticonc:
            return quantity(q, "p_hat_max") <= quantity(q, "p_threshold");
    }
    throw PreconditionViolated("recompute_pass: unknown result id");
}

double head_alignment_error(const Head& v0, const Head& v_star) {
    if (v0.size() != v_star.size())
        throw ShapeMismatch("head_alignment_error: head lengths differ");
    double a = v0.dot(v_star), b = v_star.dot(v_star);
    return std::abs(a * a - b * b);
}

double theorem1_bound(const ProblemInstance& inst, double phi_sq) {
    double phi = std::sqrt(std::max(phi_sq, 0.0));
    double wn = inst.w_star.norm();
    Subspace r0 = rowspace(inst.b_init);
    Subspace s_perp = orthogonal_complement(inst.train.span);
    double cangle = principal_angle_cos(r0, s_perp);
    double sig_min = sigma_min_eigenvalue(inst.sigma_ood.sigma);
    double alignment = std::min(phi, phi_sq / wn) / ((1.0 + wn) * (1.0 + wn));
    return std::sqrt(sig_min) *
           (cangle / std::sqrt(static_cast<double>(inst.k)) * alignment - inst.eps_measured);
}

TheoremReport verify_theorem1(const ProblemInstance& inst, const Trajectory& traj,
                              double phi_sq) {
    Subspace r0 = rowspace(inst.b_init);
    Subspace s_perp = orthogonal_complement(inst.train.span);
    double rhs = theorem1_bound(inst, phi_sq);
    double min_sqrt = std::sqrt(std::max(min_ood_over_samples(traj), 0.0));

    std::map<std::string, double> q{
        {"phi_sq", phi_sq},
        {"eps", inst.eps_measured},
        {"w_norm", inst.w_star.norm()},
        {"cangle_r0_sperp", principal_angle_cos(r0, s_perp)},
        {"sigma_min", sigma_min_eigenvalue(inst.sigma_ood.sigma)},
        {"rhs", rhs},
        {"min_sqrt_lood", min_sqrt},
    };
    std::string notes;
    if (rhs > 0.0) {
        q["ratio"] = min_sqrt / rhs;
    } else {
        notes = "vacuous: bound right-hand side is nonpositive";
    }
    return make_report(ResultId::kThm1, std::move(q), std::move(notes));
}

TheoremReport verify_balancedness(const Trajectory& traj) {
    const auto& b0 = traj.initial().state.b.entries;
    double budget = 1e-6 * (1.0 + b0.squaredNorm());
    double max_drift = 0.0;
    for (const auto& s : traj.samples)
        max_drift = std::max(max_drift, s.metrics.balancedness_drift);
    return make_report(ResultId::kLemBalance,
                       {{"max_drift", max_drift}, {"budget", budget}}, "");
}

TheoremReport verify_feature_invariance(const Trajectory& traj, const Subspace& s_perp) {
    const auto& b0 = traj.initial().state.b.entries;
    double tol = 1e-9 * b0.norm();
    double max_drift = 0.0;
    for (const auto& s : traj.samples) {
        Eigen::MatrixXd moved = (s.state.b.entries - b0) * s_perp.basis;
        if (moved.size() > 0)
            max_drift = std::max(max_drift, moved.colwise().norm().maxCoeff());
    }
    return make_report(ResultId::kLemFeatinv, {{"max_drift", max_drift}, {"tol", tol}}, "");
}

double lp_ood_upper_bound(const ProblemInstance& inst, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw PreconditionViolated("lp_ood_upper_bound: delta must be in (0,1)");
    if (inst.n < 5 * inst.m)
        throw PreconditionViolated("lp_ood_upper_bound: requires n >= 5m");
    if (static_cast<double>(inst.n) < 10.0 * std::log(1.0 / delta))
        throw PreconditionViolated("lp_ood_upper_bound: requires n >= 10 log(1/delta)");
    double cangle = principal_angle_cos(rowspace(inst.b_init), inst.train.span);
    if (cangle <= 0.0)
        throw PreconditionViolated("lp_ood_upper_bound: pretrained rowspace orthogonal to data span");
    return std::log(static_cast<double>(inst.n) / delta) / (cangle * cangle) *
           inst.eps_measured * inst.w_star.norm();
}

TheoremReport ood_ratio_sweep(const InstanceConfig& tmpl, const std::vector<double>& eps_list,
                              int n_seeds, const IntegratorConfig& icfg, int jobs) {
    if (eps_list.size() < 2)
        throw PreconditionViolated("ood_ratio_sweep: need at least two error levels");
    for (std::size_t i = 1; i < eps_list.size(); ++i)
        if (!(eps_list[i] < eps_list[i - 1]))
            throw PreconditionViolated("ood_ratio_sweep: error levels must be strictly decreasing");
    if (n_seeds < 1) throw PreconditionViolated("ood_ratio_sweep: need n_seeds >= 1");

    const std::size_t n_eps = eps_list.size();
    std::vector<std::vector<double>> ratios(static_cast<std::size_t>(n_seeds),
                                            std::vector<double>(n_eps, 0.0));
    std::vector<std::vector<double>> lp_sqrt(static_cast<std::size_t>(n_seeds),
                                             std::vector<double>(n_eps, 0.0));
    std::vector<std::vector<double>> eps_meas(static_cast<std::size_t>(n_seeds),
                                              std::vector<double>(n_eps, 0.0));
    std::vector<int> degenerate(static_cast<std::size_t>(n_seeds), 0);

    parallel_for(n_seeds, jobs, [&](int seed_idx) {
        InstanceConfig cfg = tmpl;
        cfg.seed = derive_seed(tmpl.seed, static_cast<std::uint64_t>(seed_idx));
        cfg.eps = eps_list[0];
        ProblemInstance base = build_instance(cfg);

        // The statement only speaks about nondegenerate geometry; random
        // instances satisfy it almost surely, but check rather than assume.
        Subspace r_star = rowspace(base.b_star);
        Subspace s_perp = orthogonal_complement(base.train.span);
        if (principal_angle_cos(r_star, base.train.span) <= 1e-8 ||
            principal_angle_cos(r_star, s_perp) <= 1e-8) {
            degenerate[static_cast<std::size_t>(seed_idx)] = 1;
            return;
        }

        for (std::size_t j = 0; j < n_eps; ++j) {
            ProblemInstance inst = j == 0 ? base : with_eps(base, cfg, eps_list[j]);
            Head v_lp = lp_solve_closed_form(inst.b_init, inst.train);
            double lp_ood = ood_loss(v_lp, inst.b_init, inst);
            Trajectory traj = integrate_fine_tuning(inst, icfg);
            double ft_min = min_ood_over_samples(traj);
            auto row = static_cast<std::size_t>(seed_idx);
            ratios[row][j] = lp_ood / ft_min;
            lp_sqrt[row][j] = std::sqrt(std::max(lp_ood, 0.0));
            eps_meas[row][j] = inst.eps_measured;
        }
    });

    if (std::accumulate(degenerate.begin(), degenerate.end(), 0) > 0)
        throw PreconditionViolated("ood_ratio_sweep: degenerate instance geometry in battery");

    std::map<std::string, double> q{{"n_eps", static_cast<double>(n_eps)},
                                    {"n_seeds", static_cast<double>(n_seeds)},
                                    {"final_max", 0.05}};
    for (std::size_t j = 0; j < n_eps; ++j) {
        double mean_ratio = 0.0, mean_sqrt = 0.0, mean_eps = 0.0;
        for (int i = 0; i < n_seeds; ++i) {
            auto row = static_cast<std::size_t>(i);
            mean_ratio += ratios[row][j];
            mean_sqrt += lp_sqrt[row][j];
            mean_eps += eps_meas[row][j];
        }
        q["eps_" + std::to_string(j)] = eps_list[j];
        q["ratio_" + std::to_string(j)] = mean_ratio / n_seeds;
        q["lp_sqrt_lood_" + std::to_string(j)] = mean_sqrt / n_seeds;
        q["eps_measured_" + std::to_string(j)] = mean_eps / n_seeds;
    }
    q["final_ratio"] = q["ratio_" + std::to_string(n_eps - 1)];
    return make_report(ResultId::kThm2Ratio, std::move(q),
                       "mean probe/tuned OOD-loss ratio per error level");
}

TheoremReport verify_id_comparison(const ProblemInstance& inst, const IntegratorConfig& icfg) {
    if (inst.eps_measured <= 1e-12)
        throw HypothesisViolated(
            "verify_id_comparison: perfect features put w* inside the pretrained rowspace");
    Subspace r0 = rowspace(inst.b_init);
    Eigen::VectorXd resid = inst.w_star - project(r0, inst.w_star);
    if (resid.norm() <= 1e-8 * inst.w_star.norm())
        throw HypothesisViolated("verify_id_comparison: w* lies in the pretrained rowspace");
    Subspace r_aug;
    try {
        r_aug = span_with_vector(r0, inst.w_star);
    } catch (const AlreadyContained&) {
        throw HypothesisViolated("verify_id_comparison: w* lies in the pretrained rowspace");
    }
    double cangle_aug = principal_angle_cos(r_aug, inst.train.span);
    if (cangle_aug <= 1e-8)
        throw HypothesisViolated(
            "verify_id_comparison: augmented span is orthogonal to the data span");

    Trajectory traj = integrate_fine_tuning(inst, icfg);
    const auto& terminal = traj.terminal();
    double l_id_ft = terminal.metrics.l_id;

    Head v_lp = lp_solve_closed_form(inst.b_init, inst.train);
    double l_id_lp = id_loss(v_lp, inst.b_init, inst);

    return make_report(ResultId::kPropId,
                       {{"l_id_ft", l_id_ft},
                        {"l_id_lp", l_id_lp},
                        {"ft_tol", 1e-10},
                        {"lp_floor", 1e-8},
                        {"cangle_raug_s", cangle_aug},
                        {"eps", inst.eps_measured}},
                       "");
}

TheoremReport verify_lpft(const ProblemInstance& inst, const IntegratorConfig& icfg,
                          double random_min_ood_floor) {
    if (inst.eps_measured > 1e-12)
        throw PreconditionViolated("verify_lpft: requires perfect pretrained features");
    if (inst.v_init.size() != inst.k)
        throw PreconditionViolated("verify_lpft: needs a numeric head for the random branch");

    Trajectory pipeline = run_lpft(inst, icfg);
    const auto& start = pipeline.initial().state;
    double max_move = 0.0;
    for (const auto& s : pipeline.samples) {
        max_move = std::max(max_move, (s.state.v - start.v).norm());
        max_move = std::max(max_move, (s.state.b.entries - start.b.entries).norm());
    }
    double lpft_max_ood = max_ood_over_samples(pipeline);

    Trajectory random_run = integrate_fine_tuning(inst, icfg);
    double random_min = min_ood_over_samples(random_run);

    return make_report(ResultId::kPropLpft,
                       {{"max_lpft_lood", lpft_max_ood},
                        {"max_param_move", max_move},
                        {"freeze_tol", 1e-10},
                        {"min_random_lood", random_min},
                        {"random_floor", random_min_ood_floor}},
                       "");
}

TheoremReport verify_angle_perturbation(int n_trials, RngStream& rng) {
    const Eigen::Index d = 100, k = 5, probe_dim = 20;
    const double eps_levels[] = {0.01, 0.1, 0.3};
    int violations = 0;
    double max_excess = -kInf;
    for (int trial = 0; trial < n_trials; ++trial) {
        auto [b_star, v_star] = make_ground_truth(d, k, 1.0, rng);
        FeatureExtractor b0 = perturb_extractor(b_star, eps_levels[trial % 3], rng);
        Subspace probe = sample_uniform_subspace(d, probe_dim, rng);
        double lhs = std::abs(principal_angle_cos(rowspace(b0), probe) -
                              principal_angle_cos(rowspace(b_star), probe));
        double rhs = extractor_distance(b0, b_star).value;
        double excess = lhs - rhs;
        max_excess = std::max(max_excess, excess);
        if (excess > 1e-10) ++violations;
    }
    return make_report(ResultId::kLemAnglePerturb,
                       {{"n_trials", static_cast<double>(n_trials)},
                        {"n_violations", static_cast<double>(violations)},
                        {"max_excess", max_excess}},
                       "excess = |cangle difference| - alignment distance, 1e-10 FP slack");
}

TheoremReport verify_subspace_angle_concentration(Eigen::Index d, Eigen::Index k,
                                                  Eigen::Index m, double delta,
                                                  int n_trials, RngStream& rng) {
    if (!(m > k)) throw PreconditionViolated("verify_subspace_angle_concentration: need m > k");
    if (!(delta > 0.0 && delta < 1.0))
        throw PreconditionViolated("verify_subspace_angle_concentration: delta in (0,1)");
    Subspace r = sample_uniform_subspace(d, k, rng);
    double dd = static_cast<double>(d);
    double bound = (std::sqrt(static_cast<double>(m)) - std::sqrt(static_cast<double>(k)) -
                    std::sqrt(2.0 * std::log(1.0 / delta))) /
                   std::sqrt(dd * std::log(2.0 * dd / delta));
    int failures = 0;
    double min_cangle = kInf;
    for (int i = 0; i < n_trials; ++i) {
        Subspace s = sample_uniform_subspace(d, m, rng);
        double c = principal_angle_cos(r, s);
        min_cangle = std::min(min_cangle, c);
        if (c < bound) ++failures;
    }
    double frac = static_cast<double>(failures) / n_trials;
    double threshold = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / n_trials);
    return make_report(ResultId::kLemSubspaceAngle,
                       {{"bound", bound},
                        {"failure_fraction", frac},
                        {"fail_threshold", threshold},
                        {"min_cangle", min_cangle},
                        {"positivity_floor", 1e-8},
                        {"n_trials", static_cast<double>(n_trials)}},
                       "");
}

TheoremReport verify_head_anticoncentration(Eigen::Index k,
                                            const std::vector<double>& sigma_sqs,
                                            const Head& v_star, double delta, int n_trials,
                                            RngStream& rng) {
    if (v_star.size() != k || v_star.norm() == 0.0)
        throw PreconditionViolated("verify_head_anticoncentration: v* must be nonzero of length k");
    if (sigma_sqs.empty())
        throw PreconditionViolated("verify_head_anticoncentration: need at least one sigma^2");
    double vsq = v_star.squaredNorm() * v_star.squaredNorm();

    // Pilot phase: empirical delta-quantile of the normalized alignment error
    // at each spread; one calibration constant must serve all of them.
    double min_quantile = kInf;
    for (double s2 : sigma_sqs) {
        std::vector<double> g(static_cast<std::size_t>(n_trials));
        double scale = std::sqrt(s2);
        for (int i = 0; i < n_trials; ++i)
            g[static_cast<std::size_t>(i)] =
                head_alignment_error(scale * rng.normal_vector(k), v_star) / vsq;
        std::nth_element(g.begin(), g.begin() + static_cast<long>(delta * n_trials), g.end());
        min_quantile = std::min(min_quantile, g[static_cast<std::size_t>(delta * n_trials)]);
    }
    double c_test = 0.95 * min_quantile / delta;
    double tau = c_test * delta * vsq;

    // Fresh phase: the calibrated threshold must be undershot with
    // probability at most delta (plus binomial slack) at every spread.
    double p_hat_max = 0.0;
    std::map<std::string, double> q{{"c_test", c_test},
                                    {"delta", delta},
                                    {"n_trials", static_cast<double>(n_trials)}};
    int idx = 0;
    for (double s2 : sigma_sqs) {
        double scale = std::sqrt(s2);
        int below = 0;
        for (int i = 0; i < n_trials; ++i)
            if (head_alignment_error(scale * rng.normal_vector(k), v_star) < tau) ++below;
        double p = static_cast<double>(below) / n_trials;
        q["p_hat_" + std::to_string(idx)] = p;
        q["sigma_sq_" + std::to_string(idx)] = s2;
        p_hat_max = std::max(p_hat_max, p);
        ++idx;
    }
    q["p_hat_max"] = p_hat_max;
    q["p_threshold"] = delta + 3.0 * std::sqrt(delta * (1.0 - delta) / n_trials);
    return make_report(ResultId::kLemHeadAnticonc, std::move(q),
                       "one calibration constant shared across all spreads");
}

TheoremReport verify_gaussian_nonasymptotic(const InstanceConfig& tmpl,
                                            const IntegratorConfig& icfg, double delta,
                                            int n_seeds, int jobs) {
    if (tmpl.n < 5 * tmpl.m)
        throw PreconditionViolated("verify_gaussian_nonasymptotic: requires n >= 5m");
    if (static_cast<double>(tmpl.n) < 10.0 * std::log(1.0 / delta))
        throw PreconditionViolated("verify_gaussian_nonasymptotic: requires n >= 10 log(1/delta)");

    std::vector<int> wins(static_cast<std::size_t>(n_seeds), 0);
    std::vector<double> thresholds(static_cast<std::size_t>(n_seeds), 0.0);
    parallel_for(n_seeds, jobs, [&](int i) {
        InstanceConfig cfg = tmpl;
        cfg.seed = derive_seed(tmpl.seed, static_cast<std::uint64_t>(i));
        cfg.eps = 0.0;
        cfg.head_mode = HeadMode::kGaussian;
        cfg.head_sigma_sq = 1.0;
        ProblemInstance base = build_instance(cfg);

        Subspace r_star = rowspace(base.b_star);
        Subspace s_perp = orthogonal_complement(base.train.span);
        double c_perp = principal_angle_cos(r_star, s_perp);
        double c_span = principal_angle_cos(r_star, base.train.span);
        double threshold = c_perp * c_span * c_span * delta * delta /
                           (std::sqrt(static_cast<double>(cfg.k)) *
                            std::log(static_cast<double>(cfg.n) / delta));
        thresholds[static_cast<std::size_t>(i)] = threshold;

        ProblemInstance inst = with_eps(base, cfg, threshold / 10.0);
        Head v_lp = lp_solve_closed_form(inst.b_init, inst.train);
        double lp_ood = ood_loss(v_lp, inst.b_init, inst);
        Trajectory traj = integrate_fine_tuning(inst, icfg);
        wins[static_cast<std::size_t>(i)] = lp_ood < min_ood_over_samples(traj) ? 1 : 0;
    });

    double win_fraction =
        std::accumulate(wins.begin(), wins.end(), 0.0) / static_cast<double>(n_seeds);
    double mean_threshold =
        std::accumulate(thresholds.begin(), thresholds.end(), 0.0) / n_seeds;
    return make_report(ResultId::kThmGaussNonasymp,
                       {{"n_seeds", static_cast<double>(n_seeds)},
                        {"win_fraction", win_fraction},
                        {"required_fraction", 1.0 - delta},
                        {"mean_eps_threshold", mean_threshold},
                        {"mean_eps_used", mean_threshold / 10.0}},
                       "probe beats tuned descent OOD in the small-error regime");
}

// ---- Suite drivers --------------------------------------------------------

namespace {

InstanceConfig battery_config(const SuiteContext& ctx, int index) {
    InstanceConfig cfg = ctx.base;
    cfg.seed = derive_seed(ctx.vcfg.seed, static_cast<std::uint64_t>(index));
    return cfg;
}

double lpft_random_floor() {
    return baselines::kRecorded ? 0.5 * baselines::kLpftRandomHeadMinOod : 0.0;
}

double thm1_floor() { return baselines::kRecorded ? 0.5 * baselines::kThm1MinRatio : 0.0; }

}  // namespace

TheoremReport theorem1_battery(const SuiteContext& ctx, int n_instances, double ratio_floor) {
    std::vector<double> ratios(static_cast<std::size_t>(n_instances), kInf);
    std::vector<int> held(static_cast<std::size_t>(n_instances), 0);
    parallel_for(n_instances, ctx.jobs, [&](int i) {
        InstanceConfig cfg = battery_config(ctx, i);
        cfg.eps = 0.0;
        cfg.head_mode = HeadMode::kZero;
        ProblemInstance inst = build_instance(cfg);
        Trajectory traj = integrate_fine_tuning(inst, ctx.icfg);
        double phi_sq = head_alignment_error(inst.v_init, inst.v_star);
        TheoremReport rep = verify_theorem1(inst, traj, phi_sq);
        held[static_cast<std::size_t>(i)] = rep.pass ? 1 : 0;
        if (rep.quantities.count("ratio"))
            ratios[static_cast<std::size_t>(i)] = rep.quantities.at("ratio");
    });
    double pass_rate = std::accumulate(held.begin(), held.end(), 0.0) / n_instances;
    double min_ratio = kInf, mean_ratio = 0.0;
    int n_ratio = 0;
    for (double r : ratios)
        if (std::isfinite(r)) {
            min_ratio = std::min(min_ratio, r);
            mean_ratio += r;
            ++n_ratio;
        }
    mean_ratio = n_ratio ? mean_ratio / n_ratio : 0.0;
    if (!std::isfinite(min_ratio)) min_ratio = 0.0;
    return make_report(ResultId::kThm1,
                       {{"n_instances", static_cast<double>(n_instances)},
                        {"pass_rate", pass_rate},
                        {"min_ratio", min_ratio},
                        {"mean_ratio", mean_ratio},
                        {"ratio_floor", ratio_floor}},
                       "perfect-features zero-head battery; ratio = observed/bound");
}

TheoremReport lpft_battery(const SuiteContext& ctx, int n_instances,
                           double random_min_ood_floor) {
    std::vector<TheoremReport> reports(static_cast<std::size_t>(n_instances));
    parallel_for(n_instances, ctx.jobs, [&](int i) {
        InstanceConfig cfg = battery_config(ctx, i);
        cfg.eps = 0.0;
        cfg.head_mode = HeadMode::kGaussian;
        cfg.head_sigma_sq = 1.0;
        ProblemInstance inst = build_instance(cfg);
        reports[static_cast<std::size_t>(i)] =
            verify_lpft(inst, ctx.icfg, random_min_ood_floor);
    });
    double max_lood = 0.0, max_move = 0.0, min_random = kInf;
    for (const auto& r : reports) {
        max_lood = std::max(max_lood, r.quantities.at("max_lpft_lood"));
        max_move = std::max(max_move, r.quantities.at("max_param_move"));
        min_random = std::min(min_random, r.quantities.at("min_random_lood"));
    }
    return make_report(ResultId::kPropLpft,
                       {{"n_instances", static_cast<double>(n_instances)},
                        {"max_lpft_lood", max_lood},
                        {"max_param_move", max_move},
                        {"freeze_tol", 1e-10},
                        {"min_random_lood", min_random},
                        {"random_floor", random_min_ood_floor}},
                       "probe-initialized runs frozen; random-head runs stay lossy");
}

TheoremReport balancedness_battery(const SuiteContext& ctx, int n_instances) {
    std::vector<TheoremReport> reports(static_cast<std::size_t>(n_instances));
    parallel_for(n_instances, ctx.jobs, [&](int i) {
        ProblemInstance inst = build_instance(battery_config(ctx, i));
        Trajectory traj = integrate_fine_tuning(inst, ctx.icfg);
        reports[static_cast<std::size_t>(i)] = verify_balancedness(traj);
    });
    double max_drift = 0.0, budget = kInf;
    for (const auto& r : reports) {
        max_drift = std::max(max_drift, r.quantities.at("max_drift"));
        budget = std::min(budget, r.quantities.at("budget"));
    }
    return make_report(ResultId::kLemBalance,
                       {{"n_instances", static_cast<double>(n_instances)},
                        {"max_drift", max_drift},
                        {"budget", budget}},
                       "");
}

TheoremReport feature_invariance_battery(const SuiteContext& ctx, int n_instances) {
    std::vector<TheoremReport> reports(static_cast<std::size_t>(n_instances));
    parallel_for(n_instances, ctx.jobs, [&](int i) {
        ProblemInstance inst = build_instance(battery_config(ctx, i));
        Trajectory traj = integrate_fine_tuning(inst, ctx.icfg);
        Subspace s_perp = orthogonal_complement(inst.train.span);
        reports[static_cast<std::size_t>(i)] = verify_feature_invariance(traj, s_perp);
    });
    double max_drift = 0.0, tol = kInf;
    for (const auto& r : reports) {
        max_drift = std::max(max_drift, r.quantities.at("max_drift"));
        tol = std::min(tol, r.quantities.at("tol"));
    }
    return make_report(ResultId::kLemFeatinv,
                       {{"n_instances", static_cast<double>(n_instances)},
                        {"max_drift", max_drift},
                        {"tol", tol}},
                       "");
}

TheoremReport lp_perfect_battery(const SuiteContext& ctx, int n_seeds) {
    std::vector<double> loods(static_cast<std::size_t>(n_seeds), 0.0);
    parallel_for(n_seeds, ctx.jobs, [&](int i) {
        InstanceConfig cfg = battery_config(ctx, i);
        cfg.eps = 0.0;
        ProblemInstance inst = build_instance(cfg);
        Head v_lp = lp_solve_closed_form(inst.b_init, inst.train);
        loods[static_cast<std::size_t>(i)] = ood_loss(v_lp, inst.b_init, inst);
    });
    double max_lood = *std::max_element(loods.begin(), loods.end());
    return make_report(ResultId::kPropLpPerfect,
                       {{"n_seeds", static_cast<double>(n_seeds)},
                        {"max_lood", max_lood},
                        {"tol", 1e-12}},
                       "perfect features: the probe recovers the target predictor");
}

TheoremReport id_comparison_battery(const SuiteContext& ctx, int n_instances) {
    std::vector<TheoremReport> reports(static_cast<std::size_t>(n_instances));
    std::vector<int> violated(static_cast<std::size_t>(n_instances), 0);
    parallel_for(n_instances, ctx.jobs, [&](int i) {
        InstanceConfig cfg = battery_config(ctx, i);
        cfg.eps = 0.1;
        cfg.head_mode = HeadMode::kZero;
        ProblemInstance inst = build_instance(cfg);
        try {
            reports[static_cast<std::size_t>(i)] = verify_id_comparison(inst, ctx.icfg);
        } catch (const HypothesisViolated&) {
            violated[static_cast<std::size_t>(i)] = 1;
        }
    });
    int n_violated = std::accumulate(violated.begin(), violated.end(), 0);
    int n_pass = 0;
    double max_ft = 0.0, min_lp = kInf;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (violated[i]) continue;
        const auto& r = reports[i];
        n_pass += r.pass ? 1 : 0;
        max_ft = std::max(max_ft, r.quantities.at("l_id_ft"));
        min_lp = std::min(min_lp, r.quantities.at("l_id_lp"));
    }
    if (!std::isfinite(min_lp)) min_lp = 0.0;
    std::string notes = n_violated
                            ? std::to_string(n_violated) + " instance(s) hit degenerate geometry"
                            : std::string();
    return make_report(ResultId::kPropId,
                       {{"n_instances", static_cast<double>(n_instances - n_violated)},
                        {"n_pass", static_cast<double>(n_pass)},
                        {"max_l_id_ft", max_ft},
                        {"min_l_id_lp", min_lp}},
                       std::move(notes));
}

TheoremReport lp_upper_bound_scaling(const SuiteContext& ctx, int n_seeds) {
    InstanceConfig tmpl = ctx.base;
    // The quantitative bound carries its own sample-size preconditions.
    tmpl.n = std::max(tmpl.n, 5 * tmpl.m);
    tmpl.seed = ctx.vcfg.seed;
    const auto& eps_list = ctx.vcfg.eps_sweep;

    std::vector<double> log_eps, log_sqrt;
    double bound_ratio_min = kInf, bound_ratio_max = -kInf;
    std::mutex collect;
    parallel_for(n_seeds, ctx.jobs, [&](int i) {
        InstanceConfig cfg = tmpl;
        cfg.seed = derive_seed(tmpl.seed, static_cast<std::uint64_t>(i));
        cfg.eps = eps_list[0];
        ProblemInstance base = build_instance(cfg);
        std::vector<std::array<double, 3>> rows;
        for (std::size_t j = 0; j < eps_list.size(); ++j) {
            ProblemInstance inst = j == 0 ? base : with_eps(base, cfg, eps_list[j]);
            Head v_lp = lp_solve_closed_form(inst.b_init, inst.train);
            double sqrt_lood = std::sqrt(std::max(ood_loss(v_lp, inst.b_init, inst), 0.0));
            double bound = lp_ood_upper_bound(inst, ctx.vcfg.delta);
            rows.push_back({inst.eps_measured, sqrt_lood, bound});
        }
        std::lock_guard<std::mutex> lock(collect);
        for (const auto& row : rows) {
            log_eps.push_back(std::log(row[0]));
            log_sqrt.push_back(std::log(row[1]));
            if (row[1] > 0.0) {
                bound_ratio_min = std::min(bound_ratio_min, row[2] / row[1]);
                bound_ratio_max = std::max(bound_ratio_max, row[2] / row[1]);
            }
        }
    });

    // Least-squares slope of log sqrt-loss against log error.
    double n = static_cast<double>(log_eps.size());
    double mx = std::accumulate(log_eps.begin(), log_eps.end(), 0.0) / n;
    double my = std::accumulate(log_sqrt.begin(), log_sqrt.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < log_eps.size(); ++i) {
        sxx += (log_eps[i] - mx) * (log_eps[i] - mx);
        sxy += (log_eps[i] - mx) * (log_sqrt[i] - my);
    }
    double slope = sxy / sxx;
    return make_report(ResultId::kLemLpUpper,
                       {{"slope", slope},
                        {"slope_target", 1.0},
                        {"slope_tol", 0.15},
                        {"n_eps", static_cast<double>(eps_list.size())},
                        {"n_seeds", static_cast<double>(n_seeds)},
                        {"bound_over_measured_min", bound_ratio_min},
                        {"bound_over_measured_max", bound_ratio_max}},
                       "only the error-scaling of the probe OOD bound is asserted");
}

TheoremReport run_suite(ResultId id, const SuiteContext& ctx) {
    switch (id) {
        case ResultId::kThm1:
            return theorem1_battery(ctx, ctx.vcfg.n_instances, thm1_floor());
        case ResultId::kThm2Ratio: {
            InstanceConfig tmpl = ctx.base;
            tmpl.seed = ctx.vcfg.seed;
            return ood_ratio_sweep(tmpl, ctx.vcfg.eps_sweep, 10, ctx.icfg, ctx.jobs);
        }
        case ResultId::kThmGaussNonasymp: {
            InstanceConfig tmpl = ctx.base;
            tmpl.n = std::max(tmpl.n, 5 * tmpl.m);
            tmpl.seed = ctx.vcfg.seed;
            return verify_gaussian_nonasymptotic(tmpl, ctx.icfg, ctx.vcfg.delta, 20, ctx.jobs);
        }
        case ResultId::kPropId:
            return id_comparison_battery(ctx, ctx.vcfg.n_instances);
        case ResultId::kPropLpft:
            return lpft_battery(ctx, ctx.vcfg.n_instances, lpft_random_floor());
        case ResultId::kPropLpPerfect:
            return lp_perfect_battery(ctx, ctx.vcfg.n_instances);
        case ResultId::kLemBalance:
            return balancedness_battery(ctx, ctx.vcfg.n_instances);
        case ResultId::kLemFeatinv:
            return feature_invariance_battery(ctx, ctx.vcfg.n_instances);
        case ResultId::kLemLpUpper:
            return lp_upper_bound_scaling(ctx, 10);
        case ResultId::kLemAnglePerturb: {
            RngStream rng(derive_seed(ctx.vcfg.seed, 0xA401));
            return verify_angle_perturbation(1000, rng);
        }
        case ResultId::kLemSubspaceAngle: {
            RngStream rng(derive_seed(ctx.vcfg.seed, 0xA402));
            return verify_subspace_angle_concentration(ctx.base.d, ctx.base.k, ctx.base.m,
                                                       ctx.vcfg.delta, ctx.vcfg.n_mc_trials,
                                                       rng);
        }
        case ResultId::kLemHeadAnticonc: {
            RngStream rng(derive_seed(ctx.vcfg.seed, 0xA403));
            auto [b_star, v_star] =
                make_ground_truth(ctx.base.d, ctx.base.k, ctx.base.w_norm, rng);
            (void)b_star;
            return verify_head_anticoncentration(ctx.base.k, {0.01, 1.0, 100.0}, v_star,
                                                 ctx.vcfg.delta, 100000, rng);
        }
    }
    throw PreconditionViolated("run_suite: unknown result id");
}

}  // namespace fdlab
