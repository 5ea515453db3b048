#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "fdlab/rng.hpp"
#include "fdlab/subspace.hpp"

namespace fdlab {

// Linear head v in R^k.
using Head = Eigen::VectorXd;

// n labeled examples drawn from the in-distribution. Rows of x live in a
// low-dimensional subspace of R^d; `span` is an orthonormal basis of their
// rowspace.
struct TrainingSet {
    Eigen::MatrixXd x;  // n x d
    Eigen::VectorXd y;  // n
    Subspace span;
};

// Second moment E[x x^T] of the shifted test distribution; must be symmetric
// positive definite.
struct SecondMoment {
    Eigen::MatrixXd sigma;
};

enum class HeadMode {
    kZero,      // v0 = 0
    kGaussian,  // v0 ~ N(0, sigma_sq I)
    kLp,        // placeholder: the flow engine substitutes the probe solution
};

enum class SecondMomentMode { kIdentity, kDiagonal };

struct InstanceConfig {
    Eigen::Index d = 100;  // ambient input dimension
    Eigen::Index k = 5;    // feature dimension
    Eigen::Index m = 20;   // in-distribution subspace dimension
    Eigen::Index n = 40;   // training examples
    double eps = 0.05;     // target alignment distance of the pretrained map
    double w_norm = 1.0;   // norm of the ground-truth predictor
    HeadMode head_mode = HeadMode::kZero;
    double head_sigma_sq = 1.0;
    SecondMomentMode sigma_mode = SecondMomentMode::kIdentity;
    std::vector<double> sigma_diag;  // used when sigma_mode == kDiagonal
    std::uint64_t seed = 0;          // per-instance stream seed
};

// One fully specified experiment: ground truth, data, pretrained
// initialization, and the shifted second moment. Immutable after build.
struct ProblemInstance {
    Eigen::Index d = 0, k = 0, m = 0, n = 0;
    FeatureExtractor b_star;  // ground-truth features, orthonormal rows
    Head v_star;              // ground-truth head
    Eigen::VectorXd w_star;   // composite predictor b_star^T v_star
    Subspace id_basis;        // basis F of the in-distribution subspace
    TrainingSet train;
    FeatureExtractor b_init;  // pretrained features, orthonormal rows
    Head v_init;              // resolved initial head (zero for kLp; the
                              // flow engine substitutes the probe solution)
    HeadMode head_mode = HeadMode::kZero;
    double head_sigma_sq = 1.0;
    SecondMoment sigma_ood;
    double eps_measured = 0.0;  // alignment distance of b_init to b_star
};

// Ground truth pair: row-orthonormal b_star plus a head drawn uniformly on
// the sphere of radius w_norm (orthonormal rows make ||b_star^T v|| = ||v||).
std::pair<FeatureExtractor, Head> make_ground_truth(Eigen::Index d, Eigen::Index k,
                                                    double w_norm, RngStream& rng);

// Draws z_i ~ N(0, I_m), sets x_i = F z_i and y_i = w_star . x_i (labels are
// noiseless by construction).
TrainingSet sample_training_data(const Subspace& f, Eigen::Index n,
                                 const FeatureExtractor& b_star, const Head& v_star,
                                 RngStream& rng);

// Row-orthonormal extractor at a prescribed alignment distance from b_star:
// adds a fixed Gaussian direction at scale s, re-orthonormalizes the rows,
// and bisects on s until the measured distance is within 0.1% of eps_target
// (at most 60 bisection steps; throws TargetUnreachable if no bracket).
// eps_target = 0 returns b_star itself.
FeatureExtractor perturb_extractor(const FeatureExtractor& b_star, double eps_target,
                                   RngStream& rng);

Head make_head_init(Eigen::Index k, HeadMode mode, double sigma_sq, RngStream& rng);

SecondMoment make_ood_second_moment(Eigen::Index d, SecondMomentMode mode,
                                    const std::vector<double>& diag = {});

// Composes the pieces above with derived per-component streams; validates
// the dimension ordering k < m < d - k and n >= m.
ProblemInstance build_instance(const InstanceConfig& config);

// Instance identical to `base` except that the pretrained extractor is
// re-targeted to a different alignment error, reusing the same perturbation
// direction and head stream. Keeps everything else (ground truth, data)
// bit-identical, which makes error sweeps paired across the sweep values.
ProblemInstance with_eps(const ProblemInstance& base, const InstanceConfig& config,
                         double eps_target);

}  // namespace fdlab
