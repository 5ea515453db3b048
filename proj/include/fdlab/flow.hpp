#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "fdlab/problem.hpp"

namespace fdlab {

struct FlowState {
    double t = 0.0;
    Head v;
    FeatureExtractor b;  // rows_orthonormal deliberately unset on iterates
};

struct SampleMetrics {
    double train_loss = 0.0;
    double l_id = 0.0;
    double l_ood = 0.0;
    double balancedness_drift = 0.0;   // ||(v v^T - B B^T) - (v0 v0^T - B0 B0^T)||_F
    double feature_drift_s = 0.0;      // max_u ||B(t)u - B0 u|| over the data-span basis
    double feature_drift_sperp = 0.0;  // same over the complement basis
};

struct TrajectorySample {
    FlowState state;
    SampleMetrics metrics;
    bool terminal = false;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;  // log-spaced in t, plus terminal
    bool converged = false;
    Head lp_stage_head;  // nonempty only for the probe-then-tune pipeline

    const TrajectorySample& terminal() const { return samples.back(); }
    const TrajectorySample& initial() const { return samples.front(); }
};

struct IntegratorConfig {
    double initial_step = 0.0;  // <= 0: auto, 1e-3 / sigma_max(X)^2
    double t_max = 1e6;
    double loss_tol = 1e-12;  // converged when loss <= loss_tol * initial loss
    int n_samples = 200;
    int max_halvings = 40;
    double growth = 1.25;  // step multiplier after an unhalved accepted step
};

// Everything needed to evaluate the population losses along a trajectory.
// Derivable from a ProblemInstance; built by hand for toy setups that don't
// satisfy the standard dimension ordering.
struct LossContext {
    Eigen::VectorXd w_star;
    Subspace id_basis;       // F: basis of the in-distribution subspace
    Eigen::MatrixXd sigma;   // second moment of the shifted distribution
    Subspace data_span;      // rowspace of X
    Subspace data_span_perp;
};

LossContext make_loss_context(const ProblemInstance& inst);

// Empirical squared-residual loss ||X B^T v - Y||_2^2.
double train_loss(const Head& v, const FeatureExtractor& b, const TrainingSet& ts);

// Analytic gradients of train_loss:
//   grad_v = 2 B X^T (X B^T v - Y),   grad_b = 2 v (X B^T v - Y)^T X.
// Validated against central finite differences in the tests.
std::pair<Head, Eigen::MatrixXd> gradients(const Head& v, const FeatureExtractor& b,
                                           const TrainingSet& ts);

// Population loss under the shifted distribution:
// (w* - B^T v)^T Sigma (w* - B^T v). Zero exactly when B^T v = w*.
double ood_loss(const Head& v, const FeatureExtractor& b, const LossContext& ctx);
double ood_loss(const Head& v, const FeatureExtractor& b, const ProblemInstance& inst);

// Population loss under the training distribution. Closed form for the
// isotropic-Gaussian latent: ||F^T (w* - B^T v)||_2^2.
double id_loss(const Head& v, const FeatureExtractor& b, const LossContext& ctx);
double id_loss(const Head& v, const FeatureExtractor& b, const ProblemInstance& inst);

// Monte-Carlo estimate of the training-distribution loss for an arbitrary
// latent density. `sample_z` draws one latent vector of dimension dim(F).
double id_loss_monte_carlo(const Head& v, const FeatureExtractor& b,
                           const LossContext& ctx,
                           const std::function<Eigen::VectorXd(RngStream&)>& sample_z,
                           int n_samples, RngStream& rng);

// Shared integrator core: fourth-order Runge-Kutta on the negative-gradient
// field from (v0, b0), with the step halved whenever it would increase the
// training loss (or leak the conserved quantity; see the drift guard in the
// implementation), and grown gently after clean steps. States are recorded
// on a log-spaced time grid plus the terminal state. `freeze_b` zeroes the
// extractor gradient, leaving b0 untouched (the probe dynamics).
Trajectory integrate_core(const Head& v0, const Eigen::MatrixXd& b0,
                          const TrainingSet& ts, const LossContext& ctx,
                          const IntegratorConfig& cfg, bool freeze_b);

// Joint head+extractor descent from the instance's initialization.
Trajectory integrate_fine_tuning(const ProblemInstance& inst, const IntegratorConfig& cfg);

// Head-only descent (extractor frozen at b_init).
Trajectory lp_flow(const ProblemInstance& inst, const IntegratorConfig& cfg);

// Unique minimizer of the training loss over the head with the extractor
// frozen: v = (B0 X^T X B0^T)^{-1} B0 X^T Y. Throws SingularNormalEquations
// when the normal matrix is numerically singular (extractor rowspace nearly
// orthogonal to the data span).
Head lp_solve_closed_form(const FeatureExtractor& b0, const TrainingSet& ts);

// Two-stage pipeline: solve the frozen-extractor problem in closed form,
// then run joint descent from that head. The stage-one head is recorded on
// the returned trajectory.
Trajectory run_lpft(const ProblemInstance& inst, const IntegratorConfig& cfg);

// CSV with columns t, train_loss, l_id, l_ood, balancedness_drift,
// feature_drift_S, feature_drift_Sperp, terminal; one row per sample,
// 17-significant-digit formatting.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);

}  // namespace fdlab
