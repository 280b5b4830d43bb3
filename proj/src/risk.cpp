#include "lrft/risk.hpp"

#include <algorithm>
#include <cmath>

#include "lrft/errors.hpp"

namespace lrft {

namespace {

constexpr int kMaxConsecutiveSingular = 10;

std::string dims(Index n, Index dx) {
  return "(n = " + std::to_string(n) + ", dx = " + std::to_string(dx) + ")";
}

double sigma_at(const Vec& s, Index i) { return i < s.size() ? s(i) : 0.0; }

}  // namespace

std::string to_string(Regime r) {
  return r == Regime::kOverdetermined ? "overdetermined" : "underdetermined";
}

std::string to_string(ConstantsProfile p) {
  return p == ConstantsProfile::kAppendixExplicit ? "appendix-explicit" : "unit";
}

Regime regime_of(Index n, Index dx) {
  return n >= dx ? Regime::kOverdetermined : Regime::kUnderdetermined;
}

double exact_excess_risk(const Mat& a_hat, const TaskSpec& task) {
  if (a_hat.rows() != task.dy() || a_hat.cols() != task.dx()) {
    throw ShapeError("estimate must be dy x dx");
  }
  return ((a_hat - task.a_star()) * task.sigma_xx_sqrt()).squaredNorm();
}

RiskReport risk_report(const FineTuneEstimate& est, const TaskSpec& task, Index n) {
  RiskReport rep;
  rep.method = est.method;
  rep.excess_risk = exact_excess_risk(est.a_hat, task);
  rep.n = n;
  rep.dx = task.dx();
  rep.dy = task.dy();
  if (est.method.kind == MethodKind::kLora || est.method.kind == MethodKind::kAls) {
    rep.r = est.method.param;
  }
  return rep;
}

FftUnderTerms fft_under_decomposition(const TaskSpec& task, const Dataset& data) {
  if (data.n >= task.dx()) {
    throw RegimeError("FFT bias/variance split needs n < dx " + dims(data.n, task.dx()));
  }
  const Projectors proj = projector_onto_colspace(data.x);
  FftUnderTerms out;
  out.bias = (task.delta_star() * proj.p_perp * task.sigma_xx_sqrt()).squaredNorm();
  const double tr_noise = task.sigma_ee().trace();
  if (tr_noise != 0.0) {
    const Mat cov_pinv = pinv(empirical_covariance(data.x));
    out.variance_mc = tr_noise * (task.sigma_xx() * cov_pinv).trace() / static_cast<double>(data.n);
  }
  return out;
}

double fft_over_gaussian_closed_form(double trace_sigma_ee, Index dx, Index n) {
  if (n <= dx + 1) throw RegimeError("closed form needs n > dx + 1 " + dims(n, dx));
  return trace_sigma_ee * static_cast<double>(dx) / static_cast<double>(n - dx - 1);
}

FftUnderClosedForm fft_under_gaussian_closed_form(double delta_star_fro_sq, double trace_sigma_ee,
                                                  Index dx, Index n) {
  if (n < 0 || n >= dx - 1) throw RegimeError("closed form needs n < dx - 1 " + dims(n, dx));
  const double ddx = static_cast<double>(dx);
  const double dn = static_cast<double>(n);
  return {delta_star_fro_sq * (ddx - dn) / ddx, trace_sigma_ee * dn / (ddx - dn - 1.0)};
}

double fft_over_lower_bound(double avg_noise_var, Index dx, Index dy, Index n) {
  if (n < dx) throw RegimeError("lower bound needs n >= dx " + dims(n, dx));
  return avg_noise_var * static_cast<double>(dx) * static_cast<double>(dy) / static_cast<double>(n);
}

double lora_variance_asymptotic(Regime regime, Index r, Index dx, Index dy, Index n,
                                double lmax_sigma_ee) {
  if (n == dx) throw ThresholdError("asymptotic variance diverges at n == dx");
  if (regime != regime_of(n, dx)) {
    throw RegimeError("regime " + to_string(regime) + " inconsistent with " + dims(n, dx));
  }
  const double gap = std::sqrt(static_cast<double>(n)) - std::sqrt(static_cast<double>(dx));
  const double width = regime == Regime::kOverdetermined
                           ? static_cast<double>(std::max(dx, dy))
                           : static_cast<double>(std::max(n, dy));
  return static_cast<double>(r) * width * lmax_sigma_ee / (gap * gap);
}

double spectral_tail(const Vec& s, Index r, Index limit) {
  double tail = 0.0;
  for (Index i = r; i < std::min(limit, s.size()); ++i) tail += s(i) * s(i);
  return tail;
}

double inevitable_error_lower_bound(const TaskSpec& task, Index r) {
  const Index k = std::min(task.dx(), task.dy());
  if (r < 0 || r > k) throw InvalidRank("rank must lie in [0, min(dx, dy)]");
  const Vec s = svd(task.delta_star()).singular_values;
  return lambda_min_sym(task.sigma_xx()) * spectral_tail(s, r, k);
}

BoundExpectations estimate_bound_expectations(Regime regime, const Mat& sigma_xx, Index n,
                                              Index mc_draws, RngHandle rng) {
  const Index dx = sigma_xx.rows();
  if (regime != regime_of(n, dx)) {
    throw RegimeError("regime " + to_string(regime) + " inconsistent with " + dims(n, dx));
  }
  if (mc_draws < 1) throw RegimeError("mc_draws must be >= 1");
  const Mat root = psd_sqrt(sigma_xx);

  BoundExpectations ex;
  ex.regime = regime;
  ex.n = n;
  ex.perp_cov = Mat::Zero(dx, dx);
  double sum_ratio = 0.0;
  double sum_product = 0.0;
  Index attempt = 0;
  int consecutive_singular = 0;
  for (Index draw = 0; draw < mc_draws;) {
    Generator gen(rng.child(static_cast<std::uint64_t>(attempt++)));
    const Mat x = root * gen.gaussian(dx, n);
    const Mat cov = empirical_covariance(x);
    const Vec cov_eig = sym_eigenvalues(cov);
    const double cov_max = cov_eig.maxCoeff();
    Mat cov_inv;
    if (regime == Regime::kOverdetermined) {
      if (!(cov_eig.minCoeff() > tol::kPsd * cov_max)) {
        ++ex.singular_resamples;
        if (++consecutive_singular >= kMaxConsecutiveSingular) {
          throw SingularCovariance("empirical covariance singular in " +
                                   std::to_string(kMaxConsecutiveSingular) +
                                   " consecutive draws " + dims(n, dx));
        }
        continue;
      }
      consecutive_singular = 0;
      cov_inv = cov.inverse();
    } else {
      cov_inv = pinv(cov);
      const Mat perp = projector_onto_colspace(x).p_perp;
      ex.perp_cov += perp * sigma_xx * perp;
    }
    const double ratio = lambda_max_sym(root * cov_inv * root);
    sum_ratio += ratio;
    sum_product += cov_max * ratio;
    ++draw;
  }
  const double m = static_cast<double>(mc_draws);
  ex.draws = mc_draws;
  ex.lmax_ratio = sum_ratio / m;
  ex.lmax_product = sum_product / m;
  ex.perp_cov /= m;
  return ex;
}

BoundReport lora_bound(const BoundExpectations& ex, const TaskSpec& task, Index r,
                       ConstantsProfile profile) {
  const Index dx = task.dx();
  const Index dy = task.dy();
  const Index n = ex.n;
  if (ex.perp_cov.rows() != dx) throw ShapeError("expectations were estimated for another dx");
  if (ex.regime == Regime::kOverdetermined) {
    if (!(n >= dx && dx > r)) throw RegimeError("overdetermined bound needs n >= dx > r " + dims(n, dx));
  } else {
    if (!(r < n && n < dx)) throw RegimeError("underdetermined bound needs r < n < dx " + dims(n, dx));
  }
  if (r < 1) throw InvalidRank("bound rank must be >= 1");

  const bool explicit_consts = profile == ConstantsProfile::kAppendixExplicit;
  const Vec s = svd(task.delta_star()).singular_values;
  const double next_sq = std::pow(sigma_at(s, r), 2);
  const double lmax_xx = lambda_max_sym(task.sigma_xx());
  const double lmax_ee = lambda_max_sym(task.sigma_ee());
  const double rr = static_cast<double>(r);
  const double dn = static_cast<double>(n);

  BoundReport rep;
  rep.regime = ex.regime;
  rep.constants_profile = profile;
  if (ex.regime == Regime::kOverdetermined) {
    const double width = static_cast<double>(std::max(dx, dy));
    const double tail = spectral_tail(s, r, std::min(dx, dy));
    if (explicit_consts) {
      rep.variance_term = 160.0 * rr * width / dn * ex.lmax_ratio * lmax_ee;
      rep.trunc_bias_terms = 8.0 * rr * next_sq * (lmax_xx + 2.0 * ex.lmax_product) +
                             2.0 * lmax_xx * tail;
    } else {
      rep.variance_term = rr * width / dn * ex.lmax_ratio * lmax_ee;
      rep.trunc_bias_terms = lmax_xx * (rr * next_sq + tail) + rr * next_sq * ex.lmax_product;
    }
  } else {
    const double width = static_cast<double>(std::max(n, dy));
    const double tail = spectral_tail(s, r, std::min(n, std::min(dx, dy)));
    const double subspace =
        std::max(0.0, (task.delta_star() * ex.perp_cov * task.delta_star().transpose()).trace());
    if (explicit_consts) {
      rep.subspace_bias_term = 2.0 * subspace;
      rep.variance_term = 320.0 * rr * width / dn * lmax_ee * ex.lmax_ratio;
      rep.trunc_bias_terms = 32.0 * rr * next_sq * ex.lmax_product +
                             2.0 * (4.0 * rr * next_sq + tail) * lmax_xx;
    } else {
      rep.subspace_bias_term = subspace;
      rep.variance_term = rr * width / dn * lmax_ee * ex.lmax_ratio;
      rep.trunc_bias_terms = lmax_xx * (rr * next_sq + tail) + rr * next_sq * ex.lmax_product;
    }
  }
  rep.total = rep.variance_term + rep.trunc_bias_terms + rep.subspace_bias_term;
  return rep;
}

BoundReport lora_bound(Regime regime, const TaskSpec& task, Index r, Index n, Index mc_draws,
                       RngHandle rng, ConstantsProfile profile) {
  return lora_bound(estimate_bound_expectations(regime, task.sigma_xx(), n, mc_draws, rng), task, r,
                    profile);
}

}  // namespace lrft
