#include "fdlab/problem.hpp"

#include <cmath>
#include <utility>

#include "fdlab/errors.hpp"

namespace fdlab {

namespace {

// Per-component sub-stream indices. Frozen: regression fixtures depend on
// every instance being generated from exactly these streams in this order.
enum StreamTag : std::uint64_t {
    kGroundTruthStream = 1,
    kIdSubspaceStream = 2,
    kDataStream = 3,
    kPerturbStream = 4,
    kHeadStream = 5,
};

FeatureExtractor orthonormalize_rows(const Eigen::MatrixXd& m) {
    Subspace s = orthonormalize(m.transpose());
    return FeatureExtractor{s.basis.transpose(), true};
}

}  // namespace

std::pair<FeatureExtractor, Head> make_ground_truth(Eigen::Index d, Eigen::Index k,
                                                    double w_norm, RngStream& rng) {
    if (k < 1 || d <= k)
        throw DimConstraintViolated("make_ground_truth: need d > k >= 1");
    if (!(w_norm > 0.0))
        throw PreconditionViolated("make_ground_truth: w_norm must be positive");
    FeatureExtractor b_star = orthonormalize_rows(rng.normal_matrix(k, d));
    Head v_star = w_norm * rng.unit_vector(k);
    return {std::move(b_star), std::move(v_star)};
}

TrainingSet sample_training_data(const Subspace& f, Eigen::Index n,
                                 const FeatureExtractor& b_star, const Head& v_star,
                                 RngStream& rng) {
    if (n < 1) throw PreconditionViolated("sample_training_data: need n >= 1");
    if (b_star.d() != f.ambient_dim())
        throw ShapeMismatch("sample_training_data: extractor/subspace ambient dims differ");
    Eigen::MatrixXd z = rng.normal_matrix(n, f.dim());
    Eigen::MatrixXd x = z * f.basis.transpose();
    Eigen::VectorXd w = b_star.entries.transpose() * v_star;
    Eigen::VectorXd y = x * w;
    Subspace span = column_space(x.transpose());
    return TrainingSet{std::move(x), std::move(y), std::move(span)};
}

FeatureExtractor perturb_extractor(const FeatureExtractor& b_star, double eps_target,
                                   RngStream& rng) {
    check_orthonormal_rows(b_star);
    if (!(eps_target >= 0.0 && eps_target < 0.5))
        throw PreconditionViolated("perturb_extractor: need 0 <= eps_target < 0.5");
    if (eps_target == 0.0) return b_star;

    // One fixed noise direction; only its scale is tuned. Re-orthonormalizing
    // keeps the iterate on the feasible set, so the measured distance is a
    // continuous function of the scale and bisection applies.
    Eigen::MatrixXd noise = rng.normal_matrix(b_star.k(), b_star.d());
    auto at_scale = [&](double s) {
        return orthonormalize_rows(b_star.entries + s * noise);
    };
    auto distance = [&](const FeatureExtractor& b0) {
        return extractor_distance(b0, b_star).value;
    };

    double hi = 1.0;
    FeatureExtractor cand = at_scale(hi);
    while (distance(cand) < eps_target) {
        hi *= 2.0;
        if (hi > 1e6)
            throw TargetUnreachable("perturb_extractor: could not bracket the target distance");
        cand = at_scale(hi);
    }

    double lo = 0.0;
    for (int step = 0; step < 60; ++step) {
        double mid = 0.5 * (lo + hi);
        cand = at_scale(mid);
        double dist = distance(cand);
        if (std::abs(dist - eps_target) <= 1e-3 * eps_target) return cand;
        (dist < eps_target ? lo : hi) = mid;
    }
    cand = at_scale(0.5 * (lo + hi));
    if (std::abs(distance(cand) - eps_target) <= 1e-3 * eps_target) return cand;
    throw TargetUnreachable("perturb_extractor: bisection did not reach 0.1% accuracy");
}

Head make_head_init(Eigen::Index k, HeadMode mode, double sigma_sq, RngStream& rng) {
    switch (mode) {
        case HeadMode::kZero:
            return Head::Zero(k);
        case HeadMode::kGaussian: {
            if (!(sigma_sq > 0.0))
                throw PreconditionViolated("make_head_init: gaussian mode needs sigma_sq > 0");
            return std::sqrt(sigma_sq) * rng.normal_vector(k);
        }
        case HeadMode::kLp:
            // Sentinel: the probe solution depends on the data, so the flow
            // engine fills it in. An empty head carries no numeric content.
            return Head();
    }
    throw PreconditionViolated("make_head_init: unknown head mode");
}

SecondMoment make_ood_second_moment(Eigen::Index d, SecondMomentMode mode,
                                    const std::vector<double>& diag) {
    if (mode == SecondMomentMode::kIdentity)
        return SecondMoment{Eigen::MatrixXd::Identity(d, d)};
    if (static_cast<Eigen::Index>(diag.size()) != d)
        throw ShapeMismatch("make_ood_second_moment: diagonal length != d");
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        if (!(diag[static_cast<std::size_t>(i)] > 0.0))
            throw NotPositiveDefinite("make_ood_second_moment: diagonal entries must be > 0");
        sigma(i, i) = diag[static_cast<std::size_t>(i)];
    }
    return SecondMoment{std::move(sigma)};
}

ProblemInstance build_instance(const InstanceConfig& config) {
    const auto d = config.d, k = config.k, m = config.m, n = config.n;
    if (k < 1) throw DimConstraintViolated("build_instance: k >= 1 violated");
    if (!(k < m)) throw DimConstraintViolated("build_instance: k < m violated");
    if (!(m < d - k)) throw DimConstraintViolated("build_instance: m < d - k violated");
    if (!(n >= m)) throw DimConstraintViolated("build_instance: n >= m violated");

    ProblemInstance inst;
    inst.d = d;
    inst.k = k;
    inst.m = m;
    inst.n = n;

    RngStream gt_rng(derive_seed(config.seed, kGroundTruthStream));
    std::tie(inst.b_star, inst.v_star) = make_ground_truth(d, k, config.w_norm, gt_rng);
    inst.w_star = inst.b_star.entries.transpose() * inst.v_star;

    RngStream id_rng(derive_seed(config.seed, kIdSubspaceStream));
    inst.id_basis = sample_uniform_subspace(d, m, id_rng);

    RngStream data_rng(derive_seed(config.seed, kDataStream));
    inst.train = sample_training_data(inst.id_basis, n, inst.b_star, inst.v_star, data_rng);

    RngStream pert_rng(derive_seed(config.seed, kPerturbStream));
    inst.b_init = perturb_extractor(inst.b_star, config.eps, pert_rng);
    inst.eps_measured = extractor_distance(inst.b_init, inst.b_star).value;

    RngStream head_rng(derive_seed(config.seed, kHeadStream));
    inst.v_init = make_head_init(k, config.head_mode, config.head_sigma_sq, head_rng);
    inst.head_mode = config.head_mode;
    inst.head_sigma_sq = config.head_sigma_sq;

    inst.sigma_ood = make_ood_second_moment(d, config.sigma_mode, config.sigma_diag);
    return inst;
}

ProblemInstance with_eps(const ProblemInstance& base, const InstanceConfig& config,
                         double eps_target) {
    ProblemInstance inst = base;
    RngStream pert_rng(derive_seed(config.seed, kPerturbStream));
    inst.b_init = perturb_extractor(inst.b_star, eps_target, pert_rng);
    inst.eps_measured = extractor_distance(inst.b_init, inst.b_star).value;
    return inst;
}

}  // namespace fdlab
