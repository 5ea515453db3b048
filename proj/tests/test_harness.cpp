#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <string>

#include <json.hpp>

#include "fdlab/errors.hpp"
#include "fdlab/flow.hpp"
#include "fdlab/harness.hpp"
#include "fdlab/problem.hpp"
#include "fdlab/report_io.hpp"
#include "fdlab/rng.hpp"
#include "fdlab/subspace.hpp"

using namespace fdlab;

namespace {

InstanceConfig small_config(std::uint64_t seed, double eps) {
    InstanceConfig c;
    c.d = 20;
    c.k = 3;
    c.m = 8;
    c.n = 16;
    c.eps = eps;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("result ids round-trip through their wire names") {
    for (ResultId id : all_result_ids())
        CHECK(result_id_from_name(result_id_name(id)) == id);
    CHECK(all_result_ids().size() == 12);
    CHECK_THROWS_AS(result_id_from_name("NOT_A_SUITE"), ConfigError);
}

TEST_CASE("head alignment error on analytic cases") {
    Head a(2), b(2);
    a << 1, 0;
    b << 2, 0;
    CHECK(head_alignment_error(a, a) == 0.0);
    Head zero = Head::Zero(2), e1(2);
    e1 << 1, 0;
    CHECK(head_alignment_error(zero, e1) == 1.0);
    CHECK(head_alignment_error(a, b) == 12.0);  // |4 - 16|
    Head wrong(3);
    CHECK_THROWS_AS(head_alignment_error(wrong, a), ShapeMismatch);
}

TEST_CASE("zero head init gives alignment error equal to the predictor norm to the 4th") {
    InstanceConfig cfg = small_config(21, 0.0);
    cfg.w_norm = 1.7;
    ProblemInstance inst = build_instance(cfg);
    double expected = std::pow(inst.v_star.squaredNorm(), 2);
    CHECK(head_alignment_error(inst.v_init, inst.v_star) == expected);
    CHECK(expected == doctest::Approx(std::pow(1.7, 4)).epsilon(1e-12));
}

TEST_CASE("lower-bound expression: sign, monotonicity, and the default plug-in value") {
    ProblemInstance inst = build_instance(small_config(33, 0.05));
    double phi_sq = std::pow(inst.v_star.squaredNorm(), 2);

    // Strictly decreasing in the alignment error at fixed everything else.
    ProblemInstance worse = inst;
    worse.eps_measured = inst.eps_measured + 0.1;
    CHECK(theorem1_bound(worse, phi_sq) < theorem1_bound(inst, phi_sq));
    ProblemInstance hopeless = inst;
    hopeless.eps_measured = 10.0;
    CHECK(theorem1_bound(hopeless, phi_sq) < 0.0);

    // Zero alignment error (probe-initialized head): bound is nonpositive.
    CHECK(theorem1_bound(inst, 0.0) <= 0.0);

    // Default-size instance, perfect features, unit predictor, zero head:
    // the expression collapses to cangle(R0, S_perp) / (4 sqrt k).
    InstanceConfig big;  // defaults: d=100, k=5, m=20, n=40, w_norm=1
    big.eps = 0.0;
    big.seed = 77;
    ProblemInstance perfect = build_instance(big);
    Subspace r0 = orthonormalize(perfect.b_init.entries.transpose());
    Subspace s_perp = orthogonal_complement(perfect.train.span);
    double cangle = principal_angle_cos(r0, s_perp);
    double phi2 = std::pow(perfect.v_star.squaredNorm(), 2);
    CHECK(theorem1_bound(perfect, phi2) ==
          doctest::Approx(cangle / (4.0 * std::sqrt(5.0))).epsilon(1e-12));
}

TEST_CASE("lower-bound verification: asserting run and vacuous run") {
    InstanceConfig cfg = small_config(44, 0.0);
    ProblemInstance inst = build_instance(cfg);
    IntegratorConfig icfg;
    double phi_sq = head_alignment_error(inst.v_init, inst.v_star);

    Trajectory ft = integrate_fine_tuning(inst, icfg);
    TheoremReport rep = verify_theorem1(inst, ft, phi_sq);
    CHECK(rep.pass);
    CHECK(rep.quantities.at("rhs") > 0.0);
    CHECK(rep.quantities.at("min_sqrt_lood") > 0.0);  // tuned loss never vanishes
    CHECK(rep.pass == recompute_pass(rep.result_id, rep.quantities));

    // Probe-initialized head: phi = 0, bound nonpositive, vacuous pass.
    TheoremReport vac = verify_theorem1(inst, ft, 0.0);
    CHECK(vac.pass);
    CHECK(vac.quantities.at("rhs") <= 0.0);
    CHECK(vac.notes.find("vacuous") != std::string::npos);
}

TEST_CASE("conservation and invariance reports wrap the trajectory metrics") {
    ProblemInstance inst = build_instance(small_config(55, 0.2));
    Trajectory ft = integrate_fine_tuning(inst, IntegratorConfig{});
    TheoremReport bal = verify_balancedness(ft);
    CHECK(bal.pass);
    CHECK(bal.quantities.at("max_drift") <= bal.quantities.at("budget"));

    LossContext ctx = make_loss_context(inst);
    TheoremReport inv = verify_feature_invariance(ft, ctx.data_span_perp);
    CHECK(inv.pass);

    // A frozen-extractor trajectory has exactly zero feature drift.
    Trajectory lp = lp_flow(inst, IntegratorConfig{});
    TheoremReport inv_lp = verify_feature_invariance(lp, ctx.data_span_perp);
    CHECK(inv_lp.quantities.at("max_drift") == 0.0);
}

TEST_CASE("probe upper bound: zero at zero error, linear in the error, guarded inputs") {
    InstanceConfig cfg = small_config(66, 0.0);
    cfg.n = 80;  // n >= 5m = 40
    ProblemInstance inst = build_instance(cfg);
    CHECK(lp_ood_upper_bound(inst, 0.1) == 0.0);

    ProblemInstance one = inst, two = inst;
    one.eps_measured = 0.05;
    two.eps_measured = 0.10;
    CHECK(lp_ood_upper_bound(two, 0.1) ==
          doctest::Approx(2.0 * lp_ood_upper_bound(one, 0.1)).epsilon(1e-12));

    ProblemInstance starved = inst;
    starved.n = 16;
    CHECK_THROWS_AS(lp_ood_upper_bound(starved, 0.1), PreconditionViolated);
    CHECK_THROWS_AS(lp_ood_upper_bound(inst, 1.5), PreconditionViolated);
    CHECK_THROWS_AS(lp_ood_upper_bound(inst, 1e-9), PreconditionViolated);  // n too small
}

TEST_CASE("ratio sweep rejects malformed error lists") {
    InstanceConfig tmpl = small_config(1, 0.1);
    IntegratorConfig icfg;
    CHECK_THROWS_AS(ood_ratio_sweep(tmpl, {0.1}, 2, icfg), PreconditionViolated);
    CHECK_THROWS_AS(ood_ratio_sweep(tmpl, {0.1, 0.1}, 2, icfg), PreconditionViolated);
    CHECK_THROWS_AS(ood_ratio_sweep(tmpl, {0.05, 0.1}, 2, icfg), PreconditionViolated);
    CHECK_THROWS_AS(ood_ratio_sweep(tmpl, {0.1, 0.05}, 0, icfg), PreconditionViolated);
}

TEST_CASE("ratio sweep on a small pair of error levels behaves and self-reports") {
    InstanceConfig tmpl = small_config(2, 0.1);
    TheoremReport rep = ood_ratio_sweep(tmpl, {0.2, 0.02}, 3, IntegratorConfig{}, 2);
    CHECK(rep.quantities.at("n_eps") == 2.0);
    CHECK(rep.quantities.at("ratio_1") < rep.quantities.at("ratio_0"));
    CHECK(rep.quantities.count("lp_sqrt_lood_0") == 1);
    CHECK(rep.quantities.count("eps_measured_1") == 1);
    CHECK(rep.pass == recompute_pass(rep.result_id, rep.quantities));
}

TEST_CASE("in-distribution comparison rejects degenerate instances") {
    ProblemInstance perfect = build_instance(small_config(3, 0.0));
    CHECK_THROWS_AS(verify_id_comparison(perfect, IntegratorConfig{}), HypothesisViolated);
}

TEST_CASE("in-distribution comparison passes on a misaligned instance") {
    ProblemInstance inst = build_instance(small_config(4, 0.1));
    TheoremReport rep = verify_id_comparison(inst, IntegratorConfig{});
    CHECK(rep.pass);
    CHECK(rep.quantities.at("l_id_ft") <= 1e-10);
    CHECK(rep.quantities.at("l_id_lp") >= 1e-8);
}

TEST_CASE("probe-then-tune verification requires perfect features and a numeric head") {
    ProblemInstance misaligned = build_instance(small_config(5, 0.1));
    CHECK_THROWS_AS(verify_lpft(misaligned, IntegratorConfig{}, 0.0), PreconditionViolated);

    ProblemInstance inst = build_instance(small_config(6, 0.0));
    TheoremReport rep = verify_lpft(inst, IntegratorConfig{}, 0.0);
    CHECK(rep.pass);
    CHECK(rep.quantities.at("max_lpft_lood") <= 1e-10);
    CHECK(rep.quantities.at("max_param_move") <= 1e-10);
    CHECK(rep.quantities.at("min_random_lood") > 0.0);  // zero-head branch stays positive
}

TEST_CASE("angle perturbation inequality holds on sampled triples") {
    RngStream rng(4001);
    TheoremReport rep = verify_angle_perturbation(100, rng);
    CHECK(rep.pass);
    CHECK(rep.quantities.at("n_violations") == 0.0);
    CHECK(rep.quantities.at("n_trials") == 100.0);
}

TEST_CASE("subspace angle concentration: full-dimensional case is deterministic") {
    RngStream rng(4002);
    TheoremReport rep = verify_subspace_angle_concentration(12, 3, 12, 0.1, 50, rng);
    CHECK(rep.pass);
    CHECK(rep.quantities.at("failure_fraction") == 0.0);
    CHECK(rep.quantities.at("min_cangle") == doctest::Approx(1.0).epsilon(1e-10));

    CHECK_THROWS_AS(verify_subspace_angle_concentration(12, 5, 4, 0.1, 10, rng),
                    PreconditionViolated);
}

TEST_CASE("head anticoncentration rejects a zero target head") {
    RngStream rng(4003);
    Head zero = Head::Zero(4);
    CHECK_THROWS_AS(verify_head_anticoncentration(4, {1.0}, zero, 0.1, 100, rng),
                    PreconditionViolated);
}

TEST_CASE("head anticoncentration passes across scales on a quick run") {
    RngStream rng(4004);
    Head v_star(3);
    v_star << 1.0, -0.5, 0.25;
    TheoremReport rep =
        verify_head_anticoncentration(3, {0.01, 1.0, 100.0}, v_star, 0.1, 20000, rng);
    CHECK(rep.pass);
    CHECK(rep.quantities.at("p_hat_max") <= rep.quantities.at("p_threshold"));
}

TEST_CASE("verdict recomputation across every suite's quantity schema") {
    using Q = std::map<std::string, double>;

    // Single-run lower-bound report: vacuous, asserting-pass, asserting-fail.
    CHECK(recompute_pass(ResultId::kThm1, Q{{"rhs", -1.0}, {"min_sqrt_lood", 0.0}}));
    CHECK(recompute_pass(ResultId::kThm1, Q{{"rhs", 0.5}, {"min_sqrt_lood", 0.6}}));
    CHECK(!recompute_pass(ResultId::kThm1, Q{{"rhs", 0.5}, {"min_sqrt_lood", 0.4}}));
    // Battery form: pass rate 1, or a recorded regression floor.
    CHECK(recompute_pass(ResultId::kThm1, Q{{"n_instances", 5}, {"pass_rate", 1.0},
                                            {"ratio_floor", 0.0}, {"min_ratio", 2.0}}));
    CHECK(recompute_pass(ResultId::kThm1, Q{{"n_instances", 5}, {"pass_rate", 0.8},
                                            {"ratio_floor", 1.5}, {"min_ratio", 2.0}}));
    CHECK(!recompute_pass(ResultId::kThm1, Q{{"n_instances", 5}, {"pass_rate", 0.8},
                                             {"ratio_floor", 0.0}, {"min_ratio", 2.0}}));

    CHECK(recompute_pass(ResultId::kThm2Ratio,
                         Q{{"n_eps", 3}, {"ratio_0", 0.5}, {"ratio_1", 0.2}, {"ratio_2", 0.01},
                           {"final_max", 0.05}}));
    CHECK(!recompute_pass(ResultId::kThm2Ratio,
                          Q{{"n_eps", 3}, {"ratio_0", 0.5}, {"ratio_1", 0.6}, {"ratio_2", 0.01},
                            {"final_max", 0.05}}));
    CHECK(!recompute_pass(ResultId::kThm2Ratio,
                          Q{{"n_eps", 2}, {"ratio_0", 0.5}, {"ratio_1", 0.2},
                            {"final_max", 0.05}}));

    CHECK(recompute_pass(ResultId::kThmGaussNonasymp,
                         Q{{"win_fraction", 0.95}, {"required_fraction", 0.9}}));
    CHECK(!recompute_pass(ResultId::kThmGaussNonasymp,
                          Q{{"win_fraction", 0.85}, {"required_fraction", 0.9}}));

    CHECK(recompute_pass(ResultId::kPropId, Q{{"l_id_ft", 1e-12}, {"l_id_lp", 1e-6},
                                              {"ft_tol", 1e-10}, {"lp_floor", 1e-8}}));
    CHECK(!recompute_pass(ResultId::kPropId, Q{{"l_id_ft", 1e-9}, {"l_id_lp", 1e-6},
                                               {"ft_tol", 1e-10}, {"lp_floor", 1e-8}}));

    CHECK(recompute_pass(ResultId::kPropLpft,
                         Q{{"max_lpft_lood", 1e-12}, {"max_param_move", 1e-12},
                           {"freeze_tol", 1e-10}, {"random_floor", 0.5},
                           {"min_random_lood", 0.7}}));
    CHECK(!recompute_pass(ResultId::kPropLpft,
                          Q{{"max_lpft_lood", 1e-12}, {"max_param_move", 1e-12},
                            {"freeze_tol", 1e-10}, {"random_floor", 0.5},
                            {"min_random_lood", 0.3}}));

    CHECK(recompute_pass(ResultId::kPropLpPerfect, Q{{"max_lood", 1e-13}, {"tol", 1e-12}}));
    CHECK(recompute_pass(ResultId::kLemBalance, Q{{"max_drift", 1e-9}, {"budget", 1e-6}}));
    CHECK(!recompute_pass(ResultId::kLemFeatinv, Q{{"max_drift", 1e-6}, {"tol", 1e-9}}));
    CHECK(recompute_pass(ResultId::kLemLpUpper,
                         Q{{"slope", 1.1}, {"slope_target", 1.0}, {"slope_tol", 0.15}}));
    CHECK(!recompute_pass(ResultId::kLemLpUpper,
                          Q{{"slope", 1.2}, {"slope_target", 1.0}, {"slope_tol", 0.15}}));
    CHECK(recompute_pass(ResultId::kLemAnglePerturb, Q{{"n_violations", 0.0}}));
    CHECK(!recompute_pass(ResultId::kLemAnglePerturb, Q{{"n_violations", 2.0}}));
    CHECK(recompute_pass(ResultId::kLemSubspaceAngle,
                         Q{{"failure_fraction", 0.1}, {"fail_threshold", 0.14},
                           {"min_cangle", 0.02}, {"positivity_floor", 1e-8}}));
    CHECK(!recompute_pass(ResultId::kLemSubspaceAngle,
                          Q{{"failure_fraction", 0.2}, {"fail_threshold", 0.14},
                            {"min_cangle", 0.02}, {"positivity_floor", 1e-8}}));
    CHECK(recompute_pass(ResultId::kLemHeadAnticonc,
                         Q{{"p_hat_max", 0.05}, {"p_threshold", 0.14}}));
}

TEST_CASE("reports serialize, round-trip, and detect tampering") {
    ProblemInstance inst = build_instance(small_config(7, 0.15));
    Trajectory ft = integrate_fine_tuning(inst, IntegratorConfig{});
    TheoremReport rep = verify_balancedness(ft);

    nlohmann::ordered_json j = report_to_json(rep);
    CHECK(j.at("result_id") == "LEM_BALANCE");
    TheoremReport back = report_from_json(j);
    CHECK(back.result_id == rep.result_id);
    CHECK(back.pass == rep.pass);
    CHECK(back.quantities == rep.quantities);
    CHECK(back.notes == rep.notes);

    // Flipping the verdict without touching the quantities is detected.
    nlohmann::json tampered = j;
    tampered["pass"] = !rep.pass;
    CHECK_THROWS_AS(report_from_json(tampered), ConfigError);

    // Quantities must stay finite.
    nlohmann::json poisoned = j;
    poisoned["quantities"]["max_drift"] = "not-a-number";
    CHECK_THROWS_AS(report_from_json(poisoned), Error);
}

TEST_CASE("suite driver honors the verification config and reports consistently") {
    SuiteContext ctx;
    ctx.vcfg.n_instances = 3;
    ctx.vcfg.n_mc_trials = 200;
    ctx.vcfg.seed = 20260821;
    ctx.base = small_config(20260821, 0.1);
    ctx.jobs = 2;

    TheoremReport bal = run_suite(ResultId::kLemBalance, ctx);
    CHECK(bal.result_id == ResultId::kLemBalance);
    CHECK(bal.pass);
    CHECK(bal.pass == recompute_pass(bal.result_id, bal.quantities));

    TheoremReport ang = run_suite(ResultId::kLemAnglePerturb, ctx);
    CHECK(ang.pass);
    CHECK(ang.quantities.at("n_trials") > 0.0);
}

TEST_CASE("suite results are independent of the job count") {
    SuiteContext a;
    a.vcfg.n_instances = 4;
    a.vcfg.seed = 99;
    a.base = small_config(99, 0.1);
    a.jobs = 1;
    SuiteContext b = a;
    b.jobs = 4;
    TheoremReport ra = run_suite(ResultId::kLemFeatinv, a);
    TheoremReport rb = run_suite(ResultId::kLemFeatinv, b);
    CHECK(ra.quantities == rb.quantities);
    CHECK(ra.pass == rb.pass);
}

TEST_CASE("summary table lists one row per report with its verdict") {
    ProblemInstance inst = build_instance(small_config(8, 0.1));
    Trajectory ft = integrate_fine_tuning(inst, IntegratorConfig{});
    std::vector<TheoremReport> reps{verify_balancedness(ft)};
    std::string table = summary_table(reps);
    CHECK(table.find("LEM_BALANCE") != std::string::npos);
    CHECK(table.find("PASS") != std::string::npos);
}
