#pragma once

// Closed-form min-norm fine-tuning estimators and the two iterative
// reference solvers used to check them.

#include <optional>
#include <string>
#include <vector>

#include "lrft/matcore.hpp"
#include "lrft/rng.hpp"
#include "lrft/taskgen.hpp"

namespace lrft {

enum class MethodKind { kFft, kLora, kGd, kAls };

struct MethodTag {
  MethodKind kind = MethodKind::kFft;
  /// LoRA / ALS rank, or GD step count.
  Index param = 0;

  static MethodTag fft() { return {MethodKind::kFft, 0}; }
  static MethodTag lora(Index r) { return {MethodKind::kLora, r}; }

  /// "fft", "lora_r4", "gd", "als_r2".
  std::string label() const;
  friend bool operator==(const MethodTag&, const MethodTag&) = default;
};

struct FineTuneEstimate {
  MethodTag method;
  Mat a_hat;   // a0 + update
  Mat update;
  /// LoRA: the rank-r truncation had tied singular values.
  bool nonunique_truncation = false;
  /// LoRA: r >= rank(Delta_FFT * Sigma_hat^{1/2}), truncation was a no-op.
  bool truncation_inactive = false;
  /// GD: false when max_iters was reached before grad_tol.
  bool converged = true;
  Index iterations = 0;
  /// ||a_hat X - Y||_F^2 per iteration (GD: every iterate, ALS: best restart).
  std::vector<double> objective_trace;
};

/// (1/n) ||a_hat X - Y||_F^2.
double empirical_risk(const Mat& a_hat, const Dataset& data);

/// Delta_FFT = (Y - A0 X) X^+, the least-norm update minimizing the
/// empirical risk. Throws ShapeError on inconsistent shapes.
FineTuneEstimate fit_fft(const Mat& a0, const Dataset& data);

/// Shared work for LoRA fits of several ranks on one dataset:
/// Delta_FFT, Sigma_hat^{1/2}, its pseudoinverse, and the SVD of
/// Delta_FFT * Sigma_hat^{1/2}.
class LoraSolver {
 public:
  LoraSolver(const Mat& a0, const Dataset& data);

  /// update = [Delta_FFT S^{1/2}]_r (S^{1/2})^+. Throws InvalidRank unless
  /// 1 <= r <= min(dx, dy).
  FineTuneEstimate fit(Index r) const;

  const Mat& fft_update() const { return fft_update_; }
  const Mat& cov_sqrt() const { return cov_sqrt_; }
  const Mat& cov_sqrt_pinv() const { return cov_sqrt_pinv_; }
  const SvdFactors& whitened_factors() const { return whitened_; }

 private:
  Mat a0_;
  Mat fft_update_;
  Mat cov_sqrt_;
  Mat cov_sqrt_pinv_;
  SvdFactors whitened_;
  Index whitened_rank_ = 0;
};

FineTuneEstimate fit_lora(const Mat& a0, const Dataset& data, Index r);

struct GdOptions {
  /// Defaults to 1 / lambda_max(X^T X).
  std::optional<double> step;
  Index max_iters = 100000;
  /// Defaults to 1e-10 * ||Y||_F.
  std::optional<double> grad_tol;
  bool record_trace = false;
};

/// Gradient descent on ||A X - Y||_F^2 / 2 started from A0. Throws
/// StepTooLarge unless 0 < step < 2 / lambda_max(X^T X).
FineTuneEstimate fit_fft_gd(const Mat& a0, const Dataset& data, const GdOptions& opts = {});

struct AlsOptions {
  Index restarts = 20;
  Index inner_iters = 500;
};

/// Rank-constrained least squares by alternating exact solves over
/// Delta = B C with B (dy x r), C (r x dx), initialized N(0, 1/r). Returns the
/// best restart.
FineTuneEstimate als_lora(const Mat& a0, const Dataset& data, Index r, const AlsOptions& opts,
                          RngHandle rng);

}  // namespace lrft
