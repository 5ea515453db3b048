#include "fdlab/flow.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "fdlab/errors.hpp"
#include "fdlab/numfmt.hpp"

namespace fdlab {

namespace {

void check_shapes(const Head& v, const FeatureExtractor& b, const TrainingSet& ts) {
    if (v.size() != b.k())
        throw ShapeMismatch("head length does not match the extractor's feature count");
    if (b.d() != ts.x.cols())
        throw ShapeMismatch("extractor width does not match the input dimension");
    if (ts.y.size() != ts.x.rows())
        throw ShapeMismatch("label count does not match the example count");
}

Eigen::VectorXd residual(const Head& v, const Eigen::MatrixXd& b, const TrainingSet& ts) {
    return ts.x * (b.transpose() * v) - ts.y;
}

double max_column_drift(const Eigen::MatrixXd& delta_b, const Subspace& s) {
    if (s.dim() == 0) return 0.0;
    return (delta_b * s.basis).colwise().norm().maxCoeff();
}

}  // namespace

LossContext make_loss_context(const ProblemInstance& inst) {
    return LossContext{inst.w_star, inst.id_basis, inst.sigma_ood.sigma, inst.train.span,
                       orthogonal_complement(inst.train.span)};
}

double train_loss(const Head& v, const FeatureExtractor& b, const TrainingSet& ts) {
    check_shapes(v, b, ts);
    return residual(v, b.entries, ts).squaredNorm();
}

std::pair<Head, Eigen::MatrixXd> gradients(const Head& v, const FeatureExtractor& b,
                                           const TrainingSet& ts) {
    check_shapes(v, b, ts);
    Eigen::VectorXd r = residual(v, b.entries, ts);
    Head grad_v = 2.0 * (b.entries * (ts.x.transpose() * r));
    Eigen::MatrixXd grad_b = 2.0 * v * (r.transpose() * ts.x);
    return {std::move(grad_v), std::move(grad_b)};
}

double ood_loss(const Head& v, const FeatureExtractor& b, const LossContext& ctx) {
    Eigen::VectorXd e = ctx.w_star - b.entries.transpose() * v;
    return e.dot(ctx.sigma * e);
}

double ood_loss(const Head& v, const FeatureExtractor& b, const ProblemInstance& inst) {
    Eigen::VectorXd e = inst.w_star - b.entries.transpose() * v;
    return e.dot(inst.sigma_ood.sigma * e);
}

double id_loss(const Head& v, const FeatureExtractor& b, const LossContext& ctx) {
    Eigen::VectorXd e = ctx.w_star - b.entries.transpose() * v;
    return (ctx.id_basis.basis.transpose() * e).squaredNorm();
}

double id_loss(const Head& v, const FeatureExtractor& b, const ProblemInstance& inst) {
    Eigen::VectorXd e = inst.w_star - b.entries.transpose() * v;
    return (inst.id_basis.basis.transpose() * e).squaredNorm();
}

double id_loss_monte_carlo(const Head& v, const FeatureExtractor& b,
                           const LossContext& ctx,
                           const std::function<Eigen::VectorXd(RngStream&)>& sample_z,
                           int n_samples, RngStream& rng) {
    Eigen::VectorXd e = ctx.w_star - b.entries.transpose() * v;
    // (w* - B^T v) . x with x = F z; precompute the m-dimensional contraction.
    Eigen::VectorXd ef = ctx.id_basis.basis.transpose() * e;
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        double err = ef.dot(sample_z(rng));
        acc += err * err;
    }
    return acc / n_samples;
}

Trajectory integrate_core(const Head& v0, const Eigen::MatrixXd& b0,
                          const TrainingSet& ts, const LossContext& ctx,
                          const IntegratorConfig& cfg, bool freeze_b) {
    if (!v0.allFinite() || !b0.allFinite())
        throw NumericalBlowup("integrate_core: non-finite initial state");
    if (cfg.t_max <= 0.0 || cfg.loss_tol <= 0.0 || cfg.n_samples < 2 || cfg.max_halvings < 1)
        throw PreconditionViolated("integrate_core: integrator config fields must be positive");

    FeatureExtractor b{b0, false};
    Head v = v0;
    check_shapes(v, b, ts);

    Eigen::JacobiSVD<Eigen::MatrixXd> xsvd(ts.x);
    double sigma_max_x = xsvd.singularValues().size() ? xsvd.singularValues()(0) : 0.0;
    double h0 = cfg.initial_step > 0.0 ? cfg.initial_step
                                       : 1e-3 / std::max(sigma_max_x * sigma_max_x, 1e-12);

    // Conserved-quantity reference and its leak budget. The continuous flow
    // keeps v v^T - B B^T constant; the discrete leak measures integrator
    // error, so a step may also be rejected for leaking too much at once.
    const Eigen::MatrixXd c0 = v * v.transpose() - b.entries * b.entries.transpose();
    const double b0_sq = b.entries.squaredNorm();
    const double drift_step_budget = 5e-10 * (1.0 + b0_sq);

    const double loss0 = train_loss(v, b, ts);
    if (!std::isfinite(loss0)) throw NumericalBlowup("integrate_core: non-finite initial loss");
    const double stop_loss = cfg.loss_tol * loss0;
    // Relative loss targets can't terminate a run that starts at a stationary
    // point with FP-noise loss, so stationarity is a stop condition too.
    const double stationary_tol = 1e-12 * sigma_max_x * (1.0 + ts.y.norm());

    Trajectory traj;
    double current_drift = 0.0;
    auto record = [&](double t, double loss, bool terminal) {
        SampleMetrics mtr;
        mtr.train_loss = loss;
        mtr.l_id = id_loss(v, b, ctx);
        mtr.l_ood = ood_loss(v, b, ctx);
        mtr.balancedness_drift = current_drift;
        Eigen::MatrixXd delta_b = b.entries - b0;
        mtr.feature_drift_s = max_column_drift(delta_b, ctx.data_span);
        mtr.feature_drift_sperp = max_column_drift(delta_b, ctx.data_span_perp);
        if (!traj.samples.empty() && traj.samples.back().state.t == t) {
            traj.samples.back() = TrajectorySample{FlowState{t, v, b}, mtr, terminal};
            return;
        }
        traj.samples.push_back(TrajectorySample{FlowState{t, v, b}, mtr, terminal});
    };

    // Sampling grid, log-spaced from the first step size out to t_max.
    std::vector<double> grid(static_cast<std::size_t>(cfg.n_samples));
    const double ratio = cfg.t_max / h0;
    for (int i = 0; i < cfg.n_samples; ++i)
        grid[static_cast<std::size_t>(i)] =
            h0 * std::pow(ratio, static_cast<double>(i) / (cfg.n_samples - 1));

    double t = 0.0;
    double h = h0;
    double loss = loss0;
    record(0.0, loss, false);

    auto force = [&](const Head& vv, const Eigen::MatrixXd& bb) {
        Eigen::VectorXd r = ts.x * (bb.transpose() * vv) - ts.y;
        Head gv = -2.0 * (bb * (ts.x.transpose() * r));
        Eigen::MatrixXd gb = freeze_b ? Eigen::MatrixXd::Zero(bb.rows(), bb.cols())
                                      : Eigen::MatrixXd(-2.0 * vv * (r.transpose() * ts.x));
        return std::make_pair(std::move(gv), std::move(gb));
    };

    constexpr int kMaxSteps = 500000;
    std::size_t grid_idx = 0;
    for (int step = 0; step < kMaxSteps; ++step) {
        auto [f1v, f1b] = force(v, b.entries);
        double grad_norm = std::sqrt(f1v.squaredNorm() + f1b.squaredNorm());
        if (loss <= stop_loss || grad_norm <= stationary_tol) {
            traj.converged = true;
            break;
        }
        if (t >= cfg.t_max) break;
        h = std::min(h, cfg.t_max - t);

        Head v_next;
        Eigen::MatrixXd b_next;
        double loss_next = 0.0, drift_next = 0.0;
        bool accepted = false, halved = false;
        for (int halvings = 0; halvings <= cfg.max_halvings; ++halvings) {
            auto [f2v, f2b] = force(v + 0.5 * h * f1v, b.entries + 0.5 * h * f1b);
            auto [f3v, f3b] = force(v + 0.5 * h * f2v, b.entries + 0.5 * h * f2b);
            auto [f4v, f4b] = force(v + h * f3v, b.entries + h * f3b);
            v_next = v + (h / 6.0) * (f1v + 2.0 * f2v + 2.0 * f3v + f4v);
            b_next = b.entries + (h / 6.0) * (f1b + 2.0 * f2b + 2.0 * f3b + f4b);

            Eigen::VectorXd r = ts.x * (b_next.transpose() * v_next) - ts.y;
            loss_next = r.squaredNorm();
            drift_next = freeze_b ? 0.0
                                  : ((v_next * v_next.transpose() -
                                      b_next * b_next.transpose()) -
                                     c0)
                                        .norm();
            bool finite = std::isfinite(loss_next) && std::isfinite(drift_next);
            if (finite && loss_next <= loss &&
                drift_next - current_drift <= drift_step_budget) {
                accepted = true;
                break;
            }
            if (halvings == cfg.max_halvings) {
                if (!finite)
                    throw NumericalBlowup("integrate_core: non-finite state during stepping");
                break;  // can't make progress; stop with converged = false
            }
            h *= 0.5;
            halved = true;
        }
        if (!accepted) break;

        v = std::move(v_next);
        b.entries = std::move(b_next);
        t += h;
        loss = loss_next;
        if (!freeze_b) current_drift = drift_next;
        if (!halved) h *= cfg.growth;

        if (grid_idx < grid.size() && t >= grid[grid_idx]) {
            record(t, loss, false);
            while (grid_idx < grid.size() && t >= grid[grid_idx]) ++grid_idx;
        }
    }

    record(t, loss, true);
    if (!v.allFinite() || !b.entries.allFinite())
        throw NumericalBlowup("integrate_core: non-finite terminal state");
    return traj;
}

Trajectory integrate_fine_tuning(const ProblemInstance& inst, const IntegratorConfig& cfg) {
    if (inst.v_init.size() != inst.k)
        throw PreconditionViolated(
            "integrate_fine_tuning: head is a probe placeholder; use run_lpft");
    return integrate_core(inst.v_init, inst.b_init.entries, inst.train,
                          make_loss_context(inst), cfg, /*freeze_b=*/false);
}

Trajectory lp_flow(const ProblemInstance& inst, const IntegratorConfig& cfg) {
    Head v0 = inst.v_init.size() == inst.k ? inst.v_init : Head(Head::Zero(inst.k));
    return integrate_core(v0, inst.b_init.entries, inst.train, make_loss_context(inst), cfg,
                          /*freeze_b=*/true);
}

Head lp_solve_closed_form(const FeatureExtractor& b0, const TrainingSet& ts) {
    if (b0.d() != ts.x.cols())
        throw ShapeMismatch("lp_solve_closed_form: extractor width != input dimension");
    Eigen::MatrixXd p = ts.x * b0.entries.transpose();  // n x k
    Eigen::MatrixXd normal = p.transpose() * p;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal);
    const auto& ev = es.eigenvalues();
    if (ev(0) <= 1e-12 * ev(ev.size() - 1))
        throw SingularNormalEquations(
            "lp_solve_closed_form: features carry no signal along the data span");
    Eigen::VectorXd rhs = p.transpose() * ts.y;
    return es.eigenvectors() *
           (es.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
}

Trajectory run_lpft(const ProblemInstance& inst, const IntegratorConfig& cfg) {
    Head v_probe = lp_solve_closed_form(inst.b_init, inst.train);
    Trajectory traj = integrate_core(v_probe, inst.b_init.entries, inst.train,
                                     make_loss_context(inst), cfg, /*freeze_b=*/false);
    traj.lp_stage_head = std::move(v_probe);
    return traj;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
    out << "t,train_loss,l_id,l_ood,balancedness_drift,feature_drift_S,"
           "feature_drift_Sperp,terminal\n";
    for (const auto& s : traj.samples) {
        out << format_g17(s.state.t) << ',' << format_g17(s.metrics.train_loss) << ','
            << format_g17(s.metrics.l_id) << ',' << format_g17(s.metrics.l_ood) << ','
            << format_g17(s.metrics.balancedness_drift) << ','
            << format_g17(s.metrics.feature_drift_s) << ','
            << format_g17(s.metrics.feature_drift_sperp) << ',' << (s.terminal ? 1 : 0)
            << '\n';
    }
}

}  // namespace fdlab
