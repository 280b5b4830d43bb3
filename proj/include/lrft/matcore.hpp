#pragma once

// Dense linear-algebra primitives shared by every other module. All
// functions are pure; results depend only on the input bits.

#include <Eigen/Dense>

#include <optional>
#include <string_view>

namespace lrft {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical cutoffs used throughout the library.
namespace tol {
/// Relative gap s_r - s_{r+1} below which a rank-r truncation is flagged as
/// non-unique.
inline constexpr double kTie = 1e-10;
/// Relative tolerance for treating eigenvalues of a PSD matrix as zero.
inline constexpr double kPsd = 1e-10;
/// Absolute tolerance on symmetry for inputs to psd_sqrt.
inline constexpr double kSymmetry = 1e-8;
/// Absolute reconstruction tolerance for dimensions <= 256.
inline constexpr double kReconstruction = 1e-8;
}  // namespace tol

/// Throws ShapeError if `m` is empty and NonFiniteInput if it holds NaN/Inf.
/// `what` names the argument in the message.
void require_valid(const Mat& m, std::string_view what);

/// Thin singular value decomposition m = u * diag(s) * vt.
///
/// Singular values are nonincreasing. The sign of each singular pair is
/// fixed so that the first nonzero component of every right singular vector
/// (row of vt) is nonnegative, which makes the factors bit-reproducible.
struct SvdFactors {
  Mat u;                // m x k, orthonormal columns
  Vec singular_values;  // length k = min(m, n)
  Mat vt;               // k x n, orthonormal rows

  Mat reconstruct() const;
};

SvdFactors svd(const Mat& m);

/// Result of a best rank-r approximation.
struct Truncation {
  Mat matrix;
  /// Set when s_r and s_{r+1} tie within tol::kTie * s_1; the lowest-index
  /// singular directions are kept in that case.
  bool nonunique = false;
};

/// Eckart-Young truncation [m]_r: keep the top r singular values.
/// Throws InvalidRank unless 0 <= r <= min(rows, cols).
Truncation truncate_rank(const Mat& m, Index r);

/// Same as truncate_rank but reuses precomputed factors of m.
Truncation truncate_rank(const SvdFactors& f, Index r);

/// Tie detection for a rank-r truncation of a matrix with these singular values.
bool truncation_is_nonunique(const Vec& singular_values, Index r);

/// Moore-Penrose pseudoinverse. Singular values below
/// max(rows, cols) * eps * s_1 are treated as zero.
Mat pinv(const Mat& m);

/// Symmetric PSD square root via eigendecomposition. Eigenvalues with
/// magnitude below tol::kPsd * lambda_max are set to zero; an eigenvalue
/// below -tol::kPsd * lambda_max throws NotPsd.
Mat psd_sqrt(const Mat& m);

struct Projectors {
  Mat p;       // projector onto col(x)
  Mat p_perp;  // I - p
};

/// Orthogonal projectors onto the column space of x and its complement.
Projectors projector_onto_colspace(const Mat& x);

struct SpectralStats {
  double fro_norm_sq = 0.0;
  double op_norm = 0.0;
  std::optional<double> lambda_min_sym;  // present only for symmetric input
};

SpectralStats spectral_stats(const Mat& m);

/// Eigenvalues of a symmetric matrix in ascending order.
Vec sym_eigenvalues(const Mat& m);

double lambda_max_sym(const Mat& m);
double lambda_min_sym(const Mat& m);

/// Numerical rank using the pinv cutoff.
Index numerical_rank(const Mat& m);

bool is_symmetric(const Mat& m, double abs_tol = tol::kSymmetry);

}  // namespace lrft
