#include "lrft/estimators.hpp"

#include <cmath>
#include <limits>

#include "lrft/errors.hpp"

namespace lrft {

namespace {

void check_shapes(const Mat& a0, const Dataset& data) {
  if (data.x.cols() != data.n || data.y.cols() != data.n) {
    throw ShapeError("dataset column counts disagree with n");
  }
  if (a0.cols() != data.x.rows() || a0.rows() != data.y.rows()) {
    throw ShapeError("A0 must be dy x dx for the dataset");
  }
  require_valid(a0, "A0");
  require_valid(data.x, "X");
  require_valid(data.y, "Y");
}

void check_rank(Index r, const Mat& a0) {
  const Index k = std::min(a0.rows(), a0.cols());
  if (r < 1 || r > k) {
    throw InvalidRank("LoRA rank " + std::to_string(r) + " must lie in [1, " + std::to_string(k) + "]");
  }
}

}  // namespace

std::string MethodTag::label() const {
  switch (kind) {
    case MethodKind::kFft:
      return "fft";
    case MethodKind::kLora:
      return "lora_r" + std::to_string(param);
    case MethodKind::kGd:
      return "gd";
    case MethodKind::kAls:
      return "als_r" + std::to_string(param);
  }
  return "unknown";
}

double empirical_risk(const Mat& a_hat, const Dataset& data) {
  return (a_hat * data.x - data.y).squaredNorm() / static_cast<double>(data.n);
}

FineTuneEstimate fit_fft(const Mat& a0, const Dataset& data) {
  check_shapes(a0, data);
  FineTuneEstimate est;
  est.method = MethodTag::fft();
  est.update = (data.y - a0 * data.x) * pinv(data.x);
  est.a_hat = a0 + est.update;
  return est;
}

LoraSolver::LoraSolver(const Mat& a0, const Dataset& data) : a0_(a0) {
  check_shapes(a0, data);
  fft_update_ = (data.y - a0 * data.x) * pinv(data.x);
  cov_sqrt_ = psd_sqrt(empirical_covariance(data.x));
  cov_sqrt_pinv_ = pinv(cov_sqrt_);
  whitened_ = svd(fft_update_ * cov_sqrt_);
  const Vec& s = whitened_.singular_values;
  const double cut = static_cast<double>(std::max(a0.rows(), a0.cols())) *
                     std::numeric_limits<double>::epsilon() * s(0);
  whitened_rank_ = static_cast<Index>((s.array() > cut).count());
}

FineTuneEstimate LoraSolver::fit(Index r) const {
  check_rank(r, a0_);
  FineTuneEstimate est;
  est.method = MethodTag::lora(r);
  if (r >= whitened_rank_) {
    // Eckart-Young truncation keeps everything; return Delta_FFT itself.
    est.update = fft_update_;
    est.truncation_inactive = true;
  } else {
    const Truncation t = truncate_rank(whitened_, r);
    est.update = t.matrix * cov_sqrt_pinv_;
    est.nonunique_truncation = t.nonunique;
  }
  est.a_hat = a0_ + est.update;
  return est;
}

FineTuneEstimate fit_lora(const Mat& a0, const Dataset& data, Index r) {
  check_rank(r, a0);
  return LoraSolver(a0, data).fit(r);
}

FineTuneEstimate fit_fft_gd(const Mat& a0, const Dataset& data, const GdOptions& opts) {
  check_shapes(a0, data);
  const double lmax = std::pow(svd(data.x).singular_values(0), 2);
  const double step = opts.step.value_or(lmax > 0.0 ? 1.0 / lmax : 1.0);
  if (!(step > 0.0) || !(step * lmax < 2.0)) {
    throw StepTooLarge("GD step " + std::to_string(step) + " outside (0, 2/lambda_max = " +
                       std::to_string(2.0 / lmax) + ")");
  }
  const double grad_tol = opts.grad_tol.value_or(1e-10 * data.y.norm());

  const Mat gram = data.x * data.x.transpose();
  const Mat yxt = data.y * data.x.transpose();

  FineTuneEstimate est;
  est.method = {MethodKind::kGd, 0};
  Mat a = a0;
  est.converged = false;
  Index it = 0;
  for (; it <= opts.max_iters; ++it) {
    if (opts.record_trace) est.objective_trace.push_back((a * data.x - data.y).squaredNorm());
    const Mat grad = a * gram - yxt;
    if (grad.norm() <= grad_tol) {
      est.converged = true;
      break;
    }
    if (it == opts.max_iters) break;
    a.noalias() -= step * grad;
  }
  est.iterations = it;
  est.method.param = it;
  est.update = a - a0;
  est.a_hat = a0 + est.update;
  return est;
}

FineTuneEstimate als_lora(const Mat& a0, const Dataset& data, Index r, const AlsOptions& opts,
                          RngHandle rng) {
  check_shapes(a0, data);
  if (r < 1) throw InvalidRank("ALS rank must be >= 1");
  const Index dy = a0.rows();
  const Index dx = a0.cols();
  const Mat resid = data.y - a0 * data.x;
  const Mat x_pinv = pinv(data.x);
  const Mat resid_xp = resid * x_pinv;
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(r));

  FineTuneEstimate best;
  best.method = {MethodKind::kAls, r};
  double best_obj = std::numeric_limits<double>::infinity();

  for (Index restart = 0; restart < std::max<Index>(opts.restarts, 1); ++restart) {
    Generator gen(rng.child(static_cast<std::uint64_t>(restart)));
    Mat b = init_scale * gen.gaussian(dy, r);
    Mat c = init_scale * gen.gaussian(r, dx);
    std::vector<double> trace;
    trace.push_back((b * c * data.x - resid).squaredNorm());
    for (Index it = 0; it < opts.inner_iters; ++it) {
      b = resid * pinv(c * data.x);
      c = pinv(b) * resid_xp;
      const double obj = (b * (c * data.x) - resid).squaredNorm();
      const double prev = trace.back();
      trace.push_back(obj);
      if (prev - obj <= 1e-15 * std::max(1.0, prev)) break;
    }
    if (trace.back() < best_obj) {
      best_obj = trace.back();
      best.update = b * c;
      best.iterations = static_cast<Index>(trace.size()) - 1;
      best.objective_trace = std::move(trace);
    }
  }
  best.a_hat = a0 + best.update;
  return best;
}

}  // namespace lrft
