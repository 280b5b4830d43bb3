#include "lrft/taskgen.hpp"

#include <cmath>
#include <string>

#include "lrft/errors.hpp"

namespace lrft {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Mat spectral_delta(Index dx, Index dy, const Vec& sigma, RngHandle rng) {
  Generator left(rng.child(1));
  Generator right(rng.child(2));
  const Index k = sigma.size();
  const Mat u = haar_orthonormal(dy, k, left);
  const Mat v = haar_orthonormal(dx, k, right);
  return u * sigma.asDiagonal() * v.transpose();
}

}  // namespace

void validate_spectrum(const SpectrumSpec& spec, Index dx, Index dy) {
  if (dx < 1 || dy < 1) throw ShapeError("task dimensions must be >= 1");
  const Index k = std::min(dx, dy);
  std::visit(Overloaded{
                 [&](const spectrum::LowRankGaussian& s) {
                   if (s.r_star < 1 || s.r_star > k) {
                     throw InvalidRank("r_star = " + std::to_string(s.r_star) +
                                       " must lie in [1, " + std::to_string(k) + "]");
                   }
                 },
                 [&](const spectrum::ExpDecay& s) {
                   if (!(s.lambda >= 0.0) || !(s.scale > 0.0)) {
                     throw ShapeError("exp_decay needs lambda >= 0 and scale > 0");
                   }
                 },
                 [&](const spectrum::Explicit& s) {
                   if (static_cast<Index>(s.values.size()) != k) {
                     throw ShapeError("explicit spectrum needs min(dx, dy) = " + std::to_string(k) +
                                      " values");
                   }
                   for (std::size_t i = 0; i < s.values.size(); ++i) {
                     if (!(s.values[i] >= 0.0) || (i > 0 && s.values[i] > s.values[i - 1])) {
                       throw ShapeError("explicit spectrum must be nonnegative and nonincreasing");
                     }
                   }
                 },
                 [](const spectrum::Zero&) {},
             },
             spec);
}

Index implied_rank(const SpectrumSpec& spec, Index dx, Index dy) {
  const Index k = std::min(dx, dy);
  return std::visit(Overloaded{
                        [](const spectrum::LowRankGaussian& s) { return s.r_star; },
                        [&](const spectrum::ExpDecay&) { return k; },
                        [](const spectrum::Explicit& s) {
                          Index r = 0;
                          for (double v : s.values) r += v > 0.0 ? 1 : 0;
                          return r;
                        },
                        [](const spectrum::Zero&) { return Index{0}; },
                    },
                    spec);
}

Mat haar_orthonormal(Index d, Index k, Generator& gen) {
  const Mat g = gen.gaussian(d, k);
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ() * Mat::Identity(d, k);
  const Mat r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Mat make_delta_star(Index dx, Index dy, const SpectrumSpec& spec, RngHandle rng) {
  validate_spectrum(spec, dx, dy);
  const Index k = std::min(dx, dy);
  return std::visit(
      Overloaded{
          [&](const spectrum::LowRankGaussian& s) -> Mat {
            Generator gen(rng);
            const Mat u = gen.gaussian(dy, s.r_star);
            const Mat v = gen.gaussian(s.r_star, dx);
            return (u * v) / std::sqrt(static_cast<double>(s.r_star));
          },
          [&](const spectrum::ExpDecay& s) -> Mat {
            Vec sigma(k);
            for (Index i = 0; i < k; ++i) {
              sigma(i) = s.scale * std::exp(-s.lambda * static_cast<double>(i + 1));
            }
            return spectral_delta(dx, dy, sigma, rng);
          },
          [&](const spectrum::Explicit& s) -> Mat {
            const Vec sigma = Eigen::Map<const Vec>(s.values.data(), k);
            return spectral_delta(dx, dy, sigma, rng);
          },
          [&](const spectrum::Zero&) -> Mat { return Mat::Zero(dy, dx); },
      },
      spec);
}

Mat make_covariance(Index d, const CovarianceKind& kind, bool require_definite) {
  if (d < 1) throw ShapeError("covariance dimension must be >= 1");
  return std::visit(
      Overloaded{
          [&](const covariance::Isotropic& c) -> Mat {
            if (!(c.var > 0.0)) {
              // A zero-variance isotropic noise model is the noiseless case.
              if (c.var == 0.0 && !require_definite) return Mat::Zero(d, d);
              throw NotPsd("isotropic variance must be > 0");
            }
            return c.var * Mat::Identity(d, d);
          },
          [&](const covariance::Explicit& c) -> Mat {
            require_valid(c.m, "covariance");
            if (c.m.rows() != d || c.m.cols() != d) {
              throw ShapeError("covariance must be " + std::to_string(d) + "x" + std::to_string(d));
            }
            if (!is_symmetric(c.m)) throw NotPsd("covariance is not symmetric");
            const Vec lam = sym_eigenvalues(c.m);
            const double scale = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
            if (lam.minCoeff() < -tol::kPsd * scale) throw NotPsd("covariance has a negative eigenvalue");
            if (require_definite && lam.minCoeff() <= tol::kPsd * scale) {
              throw NotPsd("feature covariance must be positive definite");
            }
            return 0.5 * (c.m + c.m.transpose());
          },
      },
      kind);
}

TaskSpec::TaskSpec(Mat a0, Mat delta_star, Mat sigma_xx, Mat sigma_ee)
    : a0_(std::move(a0)),
      delta_star_(std::move(delta_star)),
      sigma_xx_(std::move(sigma_xx)),
      sigma_ee_(std::move(sigma_ee)) {
  require_valid(a0_, "A0");
  require_valid(delta_star_, "Delta*");
  if (delta_star_.rows() != a0_.rows() || delta_star_.cols() != a0_.cols()) {
    throw ShapeError("Delta* must have the shape of A0");
  }
  if (sigma_xx_.rows() != dx() || sigma_xx_.cols() != dx()) {
    throw ShapeError("Sigma_xx must be dx x dx");
  }
  if (sigma_ee_.rows() != dy() || sigma_ee_.cols() != dy()) {
    throw ShapeError("Sigma_ee must be dy x dy");
  }
  sigma_xx_ = make_covariance(dx(), covariance::Explicit{sigma_xx_}, true);
  if (!sigma_ee_.isZero(0.0)) sigma_ee_ = make_covariance(dy(), covariance::Explicit{sigma_ee_});
  a_star_ = a0_ + delta_star_;
  sigma_xx_sqrt_ = psd_sqrt(sigma_xx_);
  sigma_ee_sqrt_ = psd_sqrt(sigma_ee_);
}

TaskSpec make_task(const TaskRecipe& recipe, RngHandle rng) {
  const Index dx = recipe.dx;
  const Index dy = recipe.dy;
  validate_spectrum(recipe.delta, dx, dy);
  Mat a0 = recipe.zero_pretrained ? Mat::Zero(dy, dx)
                                  : Generator(rng.child(static_cast<std::uint64_t>(StreamRole::kPretrained)))
                                        .gaussian(dy, dx);
  Mat delta = make_delta_star(dx, dy, recipe.delta, rng.child(static_cast<std::uint64_t>(StreamRole::kTask)));
  return TaskSpec(std::move(a0), std::move(delta), make_covariance(dx, recipe.features, true),
                  make_covariance(dy, recipe.noise));
}

Dataset sample_dataset(const TaskSpec& task, Index n, RngHandle features, RngHandle noise) {
  if (n < 1) throw ShapeError("sample size must be >= 1");
  Dataset d;
  d.n = n;
  Generator fgen(features);
  Generator ngen(noise);
  d.x = task.sigma_xx_sqrt() * fgen.gaussian(task.dx(), n);
  d.noise = task.sigma_ee_sqrt() * ngen.gaussian(task.dy(), n);
  d.y = task.a_star() * d.x + d.noise;
  return d;
}

Dataset sample_dataset(const TaskSpec& task, Index n, RngHandle rng) {
  return sample_dataset(task, n, rng.child(static_cast<std::uint64_t>(StreamRole::kFeatures)),
                        rng.child(static_cast<std::uint64_t>(StreamRole::kNoise)));
}

Mat empirical_covariance(const Mat& x) {
  require_valid(x, "X");
  Mat s = (x * x.transpose()) / static_cast<double>(x.cols());
  return 0.5 * (s + s.transpose());
}

}  // namespace lrft
