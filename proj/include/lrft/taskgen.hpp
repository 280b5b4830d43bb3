#pragma once

// Ground-truth regression tasks y = (A0 + Delta*) x + eps and i.i.d.
// training data drawn from them.

#include <variant>
#include <vector>

#include "lrft/matcore.hpp"
#include "lrft/rng.hpp"

namespace lrft {

namespace spectrum {
/// Delta* = U V / sqrt(r_star), U (dy x r_star) and V (r_star x dx) Gaussian.
struct LowRankGaussian {
  Index r_star = 1;
};
/// sigma_i = scale * exp(-lambda * i), i = 1..min(dx, dy), Haar factors.
struct ExpDecay {
  double lambda = 0.0;
  double scale = 1.0;
};
/// Given nonincreasing singular values, Haar factors.
struct Explicit {
  std::vector<double> values;
};
struct Zero {};
}  // namespace spectrum

using SpectrumSpec =
    std::variant<spectrum::LowRankGaussian, spectrum::ExpDecay, spectrum::Explicit, spectrum::Zero>;

/// Throws InvalidRank / ShapeError when `spec` is inconsistent with (dx, dy).
void validate_spectrum(const SpectrumSpec& spec, Index dx, Index dy);

/// Upper bound on rank(Delta*) implied by the spectrum.
Index implied_rank(const SpectrumSpec& spec, Index dx, Index dy);

Mat make_delta_star(Index dx, Index dy, const SpectrumSpec& spec, RngHandle rng);

/// d x k orthonormal-column factor sampled from the Haar measure
/// (QR of a Gaussian matrix with the R diagonal made positive).
Mat haar_orthonormal(Index d, Index k, Generator& gen);

namespace covariance {
struct Isotropic {
  double var = 1.0;
};
struct Explicit {
  Mat m;
};
}  // namespace covariance

using CovarianceKind = std::variant<covariance::Isotropic, covariance::Explicit>;

/// Builds a covariance. With `require_definite` the result must be SPD
/// (feature covariance); otherwise PSD suffices (noise covariance).
Mat make_covariance(Index d, const CovarianceKind& kind, bool require_definite = false);

/// Immutable problem instance. Square roots of both covariances are computed
/// once at construction.
class TaskSpec {
 public:
  TaskSpec(Mat a0, Mat delta_star, Mat sigma_xx, Mat sigma_ee);

  Index dx() const { return a0_.cols(); }
  Index dy() const { return a0_.rows(); }
  const Mat& a0() const { return a0_; }
  const Mat& delta_star() const { return delta_star_; }
  const Mat& a_star() const { return a_star_; }
  const Mat& sigma_xx() const { return sigma_xx_; }
  const Mat& sigma_ee() const { return sigma_ee_; }
  const Mat& sigma_xx_sqrt() const { return sigma_xx_sqrt_; }
  const Mat& sigma_ee_sqrt() const { return sigma_ee_sqrt_; }

 private:
  Mat a0_;
  Mat delta_star_;
  Mat a_star_;
  Mat sigma_xx_;
  Mat sigma_ee_;
  Mat sigma_xx_sqrt_;
  Mat sigma_ee_sqrt_;
};

struct TaskRecipe {
  Index dx = 1;
  Index dy = 1;
  SpectrumSpec delta = spectrum::Zero{};
  CovarianceKind features = covariance::Isotropic{1.0};
  CovarianceKind noise = covariance::Isotropic{1.0};
  /// A0 has i.i.d. N(0, 1) entries unless this is set.
  bool zero_pretrained = false;
};

/// Builds a TaskSpec. A0 and Delta* use disjoint children of `rng`.
TaskSpec make_task(const TaskRecipe& recipe, RngHandle rng);

/// Training sample. y == a_star * x + noise holds exactly.
struct Dataset {
  Mat x;      // dx x n
  Mat y;      // dy x n
  Mat noise;  // dy x n
  Index n = 0;
};

/// Columns x_i = Sxx^{1/2} z_i and eps_i = See^{1/2} w_i with z, w standard
/// normal. Drawing more samples from the same handles extends the earlier
/// draw column by column.
Dataset sample_dataset(const TaskSpec& task, Index n, RngHandle features, RngHandle noise);

/// Single-handle form; features and noise use children of `rng`.
Dataset sample_dataset(const TaskSpec& task, Index n, RngHandle rng);

/// (1/n) X X^T.
Mat empirical_covariance(const Mat& x);

}  // namespace lrft
