#pragma once

#include <Eigen/Core>

#include "fdlab/rng.hpp"

namespace fdlab {

// Orthonormal basis of an r-dimensional subspace of R^d, stored as the d x r
// matrix of basis columns.
struct Subspace {
    Eigen::MatrixXd basis;

    Eigen::Index ambient_dim() const { return basis.rows(); }
    Eigen::Index dim() const { return basis.cols(); }
};

// A k x d linear feature map x -> Bx. `rows_orthonormal` marks maps whose
// rows form an orthonormal set (pretrained/ground-truth extractors); it is
// left unset on gradient-flow iterates, whose rows drift freely.
struct FeatureExtractor {
    Eigen::MatrixXd entries;
    bool rows_orthonormal = false;

    Eigen::Index k() const { return entries.rows(); }
    Eigen::Index d() const { return entries.cols(); }
};

// k x k orthogonal matrix (either determinant sign).
struct Rotation {
    Eigen::MatrixXd entries;
};

struct ExtractorDistance {
    double value = 0.0;  // spectral norm of B - U B' at the chosen alignment
    Rotation u;
};

// Validation helpers used by constructors and tests.
bool is_orthonormal_columns(const Eigen::MatrixXd& m, double tol);
void check_subspace(const Subspace& s);                  // throws NotOrthonormal
void check_orthonormal_rows(const FeatureExtractor& b);  // throws NotOrthonormal

// Wrap an already-orthonormal basis matrix; throws NotOrthonormal otherwise.
Subspace subspace_from_basis(Eigen::MatrixXd basis);

// Orthonormal basis for the column space of M (must have full column rank;
// throws RankDeficient). QR-based; the triangular factor's diagonal is made
// nonnegative so the basis is a deterministic function of M.
Subspace orthonormalize(const Eigen::MatrixXd& m);

// Orthonormal basis of the column space of M when M may be rank-deficient:
// the right number of columns is decided by the singular-value cutoff
// sigma_i > 1e-12 * sigma_max.
Subspace column_space(const Eigen::MatrixXd& m);

// Cosine of the largest principal angle between A and B: the r-th largest
// singular value of E^T F where r = min(dim A, dim B). 1 when one subspace
// contains the other, 0 when they are orthogonal. Clamped to [0, 1].
double principal_angle_cos(const Subspace& a, const Subspace& b);

// Same quantity obtained from its variational characterization
//   min over unit r in A of || F^T r ||_2,
// by projected gradient descent with `n_restarts` random starts. Requires
// dim(A) <= dim(B) (throws DimOrderViolation). Converges to
// principal_angle_cos(a, b) and is used as an independent cross-check of it.
double variational_angle_estimate(const Subspace& a, const Subspace& b,
                                  int n_restarts, RngStream& rng);

// Alignment distance between two row-orthonormal extractors of equal shape:
// the spectral norm of B - U B' at the rotation U solving the orthogonal
// Procrustes problem (which minimizes the *Frobenius* norm of the residual;
// see extractor_distance_refined for why that is only a surrogate).
// Symmetric, nonnegative, zero iff the rowspaces coincide with exact
// alignment. For k = 1 the two candidate alignments +1/-1 are enumerated,
// which makes the result exact.
ExtractorDistance extractor_distance(const FeatureExtractor& b,
                                     const FeatureExtractor& b_prime);

// Attempts to shrink the spectral-norm residual below the Procrustes
// surrogate by descent on the rotation group (Cayley parameterization,
// subgradient of the top singular value), from the surrogate solution plus
// `n_restarts` randomized starts. Never returns a value above the surrogate.
// The surrogate already upper-bounds the true minimum, so every "<=" use of
// the distance stays valid whether or not refinement is enabled.
ExtractorDistance extractor_distance_refined(const FeatureExtractor& b,
                                             const FeatureExtractor& b_prime,
                                             int n_restarts, RngStream& rng);

// Orthogonal projection of x onto S, i.e. E E^T x.
Eigen::VectorXd project(const Subspace& s, const Eigen::VectorXd& x);

// Basis of the orthogonal complement; throws FullAmbient when dim(S) = d.
Subspace orthogonal_complement(const Subspace& s);

// Uniformly random r-dimensional subspace of R^d (orthonormalized Gaussian
// matrix; the distribution is rotation invariant).
Subspace sample_uniform_subspace(Eigen::Index d, Eigen::Index r, RngStream& rng);

// span(S ∪ {w}). Throws AlreadyContained when w is (numerically) inside S.
Subspace span_with_vector(const Subspace& s, const Eigen::VectorXd& w);

}  // namespace fdlab
