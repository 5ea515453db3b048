#include "fdlab/subspace.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "fdlab/errors.hpp"

namespace fdlab {

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

// Orthogonal k x k matrix solving max_U <U, C>, i.e. the polar factor of C.
Eigen::MatrixXd procrustes_rotation(const Eigen::MatrixXd& c) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        c, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

// Cayley transform of a skew-symmetric matrix; always orthogonal.
Eigen::MatrixXd cayley(const Eigen::MatrixXd& skew) {
    Eigen::Index k = skew.rows();
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
    return (eye - 0.5 * skew).partialPivLu().solve(eye + 0.5 * skew);
}

}  // namespace

bool is_orthonormal_columns(const Eigen::MatrixXd& m, double tol) {
    Eigen::MatrixXd gram = m.transpose() * m;
    gram.diagonal().array() -= 1.0;
    return gram.cwiseAbs().maxCoeff() <= tol;
}

void check_subspace(const Subspace& s) {
    if (s.dim() < 1 || s.dim() > s.ambient_dim())
        throw NotOrthonormal("subspace dimension out of range");
    if (!is_orthonormal_columns(s.basis, 1e-10))
        throw NotOrthonormal("subspace basis columns are not orthonormal");
}

void check_orthonormal_rows(const FeatureExtractor& b) {
    if (!b.rows_orthonormal)
        throw NotOrthonormal("extractor is not marked row-orthonormal");
    Eigen::MatrixXd gram = b.entries * b.entries.transpose();
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > 1e-8)
        throw NotOrthonormal("extractor rows are not orthonormal");
}

Subspace subspace_from_basis(Eigen::MatrixXd basis) {
    Subspace s{std::move(basis)};
    check_subspace(s);
    return s;
}

Subspace orthonormalize(const Eigen::MatrixXd& m) {
    Eigen::Index d = m.rows(), r = m.cols();
    if (r < 1 || r > d) throw RankDeficient("orthonormalize: need 1 <= cols <= rows");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    if (sv(r - 1) <= 1e-12 * sv(0))
        throw RankDeficient("orthonormalize: matrix is column rank deficient");

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, r);
    // Fix the QR sign ambiguity: flip columns so the triangular factor has a
    // nonnegative diagonal, making the basis a deterministic function of m.
    Eigen::MatrixXd rfac = q.transpose() * m;
    for (Eigen::Index j = 0; j < r; ++j)
        if (rfac(j, j) < 0.0) q.col(j) = -q.col(j);
    return Subspace{std::move(q)};
}

Subspace column_space(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0)
        throw RankDeficient("column_space: zero matrix");
    Eigen::Index rank = 0;
    while (rank < sv.size() && sv(rank) > 1e-12 * sv(0)) ++rank;
    Eigen::MatrixXd basis = svd.matrixU().leftCols(rank);
    // SVD leaves each column's sign arbitrary; pin it by the largest entry.
    for (Eigen::Index j = 0; j < rank; ++j) {
        Eigen::Index imax = 0;
        basis.col(j).cwiseAbs().maxCoeff(&imax);
        if (basis(imax, j) < 0.0) basis.col(j) = -basis.col(j);
    }
    return Subspace{std::move(basis)};
}

double principal_angle_cos(const Subspace& a, const Subspace& b) {
    if (a.ambient_dim() != b.ambient_dim())
        throw DimensionMismatch("principal_angle_cos: ambient dimensions differ");
    Eigen::MatrixXd overlap = a.basis.transpose() * b.basis;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
    Eigen::Index r = std::min(a.dim(), b.dim());
    double c = svd.singularValues()(r - 1);
    return std::clamp(c, 0.0, 1.0);
}

double variational_angle_estimate(const Subspace& a, const Subspace& b,
                                  int n_restarts, RngStream& rng) {
    if (a.ambient_dim() != b.ambient_dim())
        throw DimensionMismatch("variational_angle_estimate: ambient dimensions differ");
    if (a.dim() > b.dim())
        throw DimOrderViolation("variational_angle_estimate: requires dim(A) <= dim(B)");

    // For unit r = E c the projection coefficients onto B are F^T E c, so we
    // minimize ||M c||^2 over the unit sphere with M = F^T E. Projected
    // gradient descent on the sphere plus a Rayleigh-quotient polish (dense
    // solves only); deliberately does not call an SVD, so it can serve as an
    // independent check of principal_angle_cos.
    Eigen::MatrixXd m = b.basis.transpose() * a.basis;
    Eigen::MatrixXd gram = m.transpose() * m;
    Eigen::Index n = a.dim();
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);

    // Every eigenvalue of `gram` is a squared singular value of F^T E, hence
    // in [0, 1] (both factors have orthonormal columns, so F^T E contracts).
    // A fixed step of 0.45 maps eigenvalue t to 1 - 0.9 t in [0.1, 1],
    // strictly decreasing, so the sphere iteration is a power method whose
    // dominant direction is exactly the minimizer -- no other stationary
    // point can attract it.
    const double step = 0.45;

    double best = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < std::max(1, n_restarts); ++trial) {
        Eigen::VectorXd c = rng.unit_vector(n);
        double value = c.dot(gram * c);
        for (int it = 0; it < 20000; ++it) {
            c = (c - 2.0 * step * (gram * c)).normalized();
            if (it % 64 == 63) {
                double next = c.dot(gram * c);
                // Progress over the whole 64-step window, not a single step.
                if (value - next < 1e-16 * (1.0 + value)) {
                    value = next;
                    break;
                }
                value = next;
            }
        }
        value = c.dot(gram * c);
        best = std::min(best, value);

        // Rayleigh-quotient polish: cubic local convergence onto the
        // eigenpair the descent phase has singled out.
        for (int it = 0; it < 12; ++it) {
            double theta = c.dot(gram * c);
            Eigen::FullPivLU<Eigen::MatrixXd> lu(gram - theta * id);
            Eigen::VectorXd z = lu.solve(c);
            double zn = z.norm();
            if (!std::isfinite(zn) || zn <= 1e-300 || !z.allFinite()) break;
            c = z / zn;
            double next = c.dot(gram * c);
            best = std::min(best, next);
            if (std::abs(next - theta) <= 1e-17 * (1.0 + next)) break;
        }
    }
    return std::sqrt(std::clamp(best, 0.0, 1.0));
}

ExtractorDistance extractor_distance(const FeatureExtractor& b,
                                     const FeatureExtractor& b_prime) {
    if (b.k() != b_prime.k() || b.d() != b_prime.d())
        throw ShapeMismatch("extractor_distance: extractor shapes differ");
    check_orthonormal_rows(b);
    check_orthonormal_rows(b_prime);

    Eigen::Index k = b.k();
    if (k == 1) {
        // Only two alignments exist; take whichever residual is shorter.
        double plus = (b.entries - b_prime.entries).norm();
        double minus = (b.entries + b_prime.entries).norm();
        Eigen::MatrixXd u(1, 1);
        u(0, 0) = plus <= minus ? 1.0 : -1.0;
        return ExtractorDistance{std::min(plus, minus), Rotation{u}};
    }

    Eigen::MatrixXd u = procrustes_rotation(b.entries * b_prime.entries.transpose());
    double dist = spectral_norm(b.entries - u * b_prime.entries);
    return ExtractorDistance{dist, Rotation{std::move(u)}};
}

ExtractorDistance extractor_distance_refined(const FeatureExtractor& b,
                                             const FeatureExtractor& b_prime,
                                             int n_restarts, RngStream& rng) {
    ExtractorDistance best = extractor_distance(b, b_prime);
    Eigen::Index k = b.k();
    if (k == 1) return best;  // already exact by enumeration

    auto objective = [&](const Eigen::MatrixXd& u) {
        return spectral_norm(b.entries - u * b_prime.entries);
    };

    // Starting points: the Frobenius-optimal alignment, its reflection into
    // the other O(k) component, and randomized perturbations of both.
    std::vector<Eigen::MatrixXd> starts;
    starts.push_back(best.u.entries);
    Eigen::MatrixXd flip = Eigen::MatrixXd::Identity(k, k);
    flip(0, 0) = -1.0;
    starts.push_back(best.u.entries * flip);
    for (int i = 0; i < n_restarts; ++i) {
        Eigen::MatrixXd g = rng.normal_matrix(k, k);
        Eigen::MatrixXd q = orthonormalize(g).basis;
        starts.push_back(i % 2 == 0 ? Eigen::MatrixXd(best.u.entries * q) : q);
    }

    for (const auto& start : starts) {
        Eigen::MatrixXd u = start;
        double f = objective(u);
        double eta = 0.25;
        for (int it = 0; it < 300 && eta > 1e-12; ++it) {
            // Subgradient of the top singular value of E = B - U B':
            // d sigma = -u1^T dU (B' w1) for the top singular pair (u1, w1).
            Eigen::MatrixXd e = b.entries - u * b_prime.entries;
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(
                e, Eigen::ComputeThinU | Eigen::ComputeThinV);
            Eigen::VectorXd left = svd.matrixU().col(0);
            Eigen::VectorXd right = b_prime.entries * svd.matrixV().col(0);
            Eigen::MatrixXd grad = -left * right.transpose();
            Eigen::MatrixXd utg = u.transpose() * grad;
            Eigen::MatrixXd skew = 0.5 * (utg - utg.transpose());
            if (skew.norm() < 1e-14) break;

            // Backtracking along the Cayley retraction.
            bool moved = false;
            while (eta > 1e-12) {
                Eigen::MatrixXd cand = u * cayley(-eta * skew);
                double fc = objective(cand);
                if (fc < f) {
                    u = std::move(cand);
                    f = fc;
                    eta *= 1.3;
                    moved = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!moved) break;
        }
        if (f < best.value) best = ExtractorDistance{f, Rotation{u}};
    }
    return best;
}

Eigen::VectorXd project(const Subspace& s, const Eigen::VectorXd& x) {
    if (x.size() != s.ambient_dim())
        throw DimensionMismatch("project: vector length != ambient dimension");
    return s.basis * (s.basis.transpose() * x);
}

Subspace orthogonal_complement(const Subspace& s) {
    Eigen::Index d = s.ambient_dim(), r = s.dim();
    if (r >= d)
        throw FullAmbient("orthogonal_complement: subspace already fills the space");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(s.basis);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
    return Subspace{q.rightCols(d - r)};
}

Subspace sample_uniform_subspace(Eigen::Index d, Eigen::Index r, RngStream& rng) {
    if (r < 1 || r > d)
        throw DimConstraintViolated("sample_uniform_subspace: need 1 <= r <= d");
    for (;;) {
        // A Gaussian matrix is full rank almost surely; the retry is theater
        // for the measure-zero failure.
        try {
            return orthonormalize(rng.normal_matrix(d, r));
        } catch (const RankDeficient&) {
        }
    }
}

Subspace span_with_vector(const Subspace& s, const Eigen::VectorXd& w) {
    if (w.size() != s.ambient_dim())
        throw DimensionMismatch("span_with_vector: vector length != ambient dimension");
    Eigen::VectorXd residual = w - project(s, w);
    if (residual.norm() <= 1e-10 * w.norm())
        throw AlreadyContained("span_with_vector: vector already lies in the subspace");
    // Second orthogonalization pass cleans up the usual Gram-Schmidt leakage.
    residual -= s.basis * (s.basis.transpose() * residual);
    Eigen::MatrixXd basis(s.ambient_dim(), s.dim() + 1);
    basis.leftCols(s.dim()) = s.basis;
    basis.col(s.dim()) = residual.normalized();
    return Subspace{std::move(basis)};
}

}  // namespace fdlab
