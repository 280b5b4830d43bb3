#include "lrft/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lrft/errors.hpp"

namespace lrft {

namespace {

double pinv_cutoff(const Mat& m, double s1) {
  return static_cast<double>(std::max(m.rows(), m.cols())) *
         std::numeric_limits<double>::epsilon() * s1;
}

// Flip each singular pair so the first non-negligible entry of the right
// singular vector is nonnegative.
void fix_signs(SvdFactors& f) {
  for (Index k = 0; k < f.vt.rows(); ++k) {
    auto row = f.vt.row(k);
    const double scale = row.cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    for (Index j = 0; j < row.size(); ++j) {
      if (std::abs(row(j)) > 1e-12 * scale) {
        if (row(j) < 0.0) {
          f.vt.row(k) *= -1.0;
          f.u.col(k) *= -1.0;
        }
        break;
      }
    }
  }
}

}  // namespace

void require_valid(const Mat& m, std::string_view what) {
  if (m.rows() < 1 || m.cols() < 1) {
    throw ShapeError(std::string(what) + ": matrix must have at least one row and column");
  }
  if (!m.allFinite()) {
    throw NonFiniteInput(std::string(what) + ": matrix contains NaN or Inf");
  }
}

Mat SvdFactors::reconstruct() const { return u * singular_values.asDiagonal() * vt; }

SvdFactors svd(const Mat& m) {
  require_valid(m, "svd input");
  Eigen::JacobiSVD<Mat> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (dec.info() != Eigen::Success) {
    // Eigen's two-sided Jacobi sweeps do not report a count; pass the
    // ComputationInfo code instead.
    throw NumericalFailure("svd did not converge", static_cast<int>(dec.info()));
  }
  SvdFactors f{dec.matrixU(), dec.singularValues(), dec.matrixV().transpose()};
  if (!f.u.allFinite() || !f.vt.allFinite()) {
    throw NumericalFailure("svd produced non-finite factors", 0);
  }
  fix_signs(f);
  return f;
}

bool truncation_is_nonunique(const Vec& s, Index r) {
  if (r <= 0 || r >= s.size()) return false;
  const double s1 = s(0);
  if (s1 == 0.0) return false;
  // Both tied at zero means the truncation is just exact (rank < r).
  if (s(r - 1) <= tol::kTie * s1) return false;
  return s(r - 1) - s(r) <= tol::kTie * s1;
}

Truncation truncate_rank(const SvdFactors& f, Index r) {
  const Index k = f.singular_values.size();
  if (r < 0 || r > k) {
    throw InvalidRank("rank " + std::to_string(r) + " outside [0, " + std::to_string(k) + "]");
  }
  Truncation t;
  t.matrix = f.u.leftCols(r) * f.singular_values.head(r).asDiagonal() * f.vt.topRows(r);
  t.nonunique = truncation_is_nonunique(f.singular_values, r);
  return t;
}

Truncation truncate_rank(const Mat& m, Index r) {
  const Index k = std::min(m.rows(), m.cols());
  if (r < 0 || r > k) {
    throw InvalidRank("rank " + std::to_string(r) + " outside [0, " + std::to_string(k) + "]");
  }
  return truncate_rank(svd(m), r);
}

Mat pinv(const Mat& m) {
  const SvdFactors f = svd(m);
  const Vec& s = f.singular_values;
  const double cut = pinv_cutoff(m, s(0));
  Vec inv = Vec::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  }
  return f.vt.transpose() * inv.asDiagonal() * f.u.transpose();
}

Index numerical_rank(const Mat& m) {
  const Vec s = svd(m).singular_values;
  const double cut = pinv_cutoff(m, s(0));
  return static_cast<Index>((s.array() > cut).count());
}

bool is_symmetric(const Mat& m, double abs_tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= abs_tol;
}

Mat psd_sqrt(const Mat& m) {
  require_valid(m, "psd_sqrt input");
  if (m.rows() != m.cols()) throw ShapeError("psd_sqrt: matrix must be square");
  if (!is_symmetric(m)) throw NotPsd("psd_sqrt: matrix is not symmetric");
  const Mat sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw NumericalFailure("psd_sqrt eigendecomposition did not converge", 0);
  }
  const Vec& lam = eig.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  if (scale == 0.0) return Mat::Zero(m.rows(), m.cols());
  const double cut = tol::kPsd * scale;
  Vec root(lam.size());
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -cut) {
      throw NotPsd("psd_sqrt: eigenvalue " + std::to_string(lam(i)) + " below tolerance");
    }
    root(i) = lam(i) > cut ? std::sqrt(lam(i)) : 0.0;
  }
  const Mat& v = eig.eigenvectors();
  Mat out = v * root.asDiagonal() * v.transpose();
  return 0.5 * (out + out.transpose());
}

Projectors projector_onto_colspace(const Mat& x) {
  Mat p = x * pinv(x);
  p = 0.5 * (p + p.transpose());
  Mat perp = Mat::Identity(x.rows(), x.rows()) - p;
  return {std::move(p), std::move(perp)};
}

Vec sym_eigenvalues(const Mat& m) {
  if (m.rows() != m.cols()) throw ShapeError("sym_eigenvalues: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw NumericalFailure("symmetric eigensolver did not converge", 0);
  }
  return eig.eigenvalues();
}

double lambda_max_sym(const Mat& m) { return sym_eigenvalues(m).maxCoeff(); }

double lambda_min_sym(const Mat& m) { return sym_eigenvalues(m).minCoeff(); }

SpectralStats spectral_stats(const Mat& m) {
  require_valid(m, "spectral_stats input");
  SpectralStats out;
  out.fro_norm_sq = m.squaredNorm();
  out.op_norm = svd(m).singular_values(0);
  if (is_symmetric(m)) out.lambda_min_sym = lambda_min_sym(m);
  return out;
}

}  // namespace lrft
