#pragma once

// Excess-risk evaluation: the exact population formula, FFT closed forms in
// both regimes, LoRA upper bounds with explicit constants, asymptotic LoRA
// variance, and the rank-r lower bound.

#include <optional>
#include <string>

#include "lrft/estimators.hpp"
#include "lrft/matcore.hpp"
#include "lrft/rng.hpp"
#include "lrft/taskgen.hpp"

namespace lrft {

enum class Regime { kOverdetermined, kUnderdetermined };

std::string to_string(Regime r);

/// Regime implied by (n, dx): overdetermined iff n >= dx.
Regime regime_of(Index n, Index dx);

struct RiskReport {
  MethodTag method;
  double excess_risk = 0.0;
  std::optional<double> bias_part;
  std::optional<double> variance_part;
  Index n = 0;
  Index dx = 0;
  Index dy = 0;
  std::optional<Index> r;
};

/// ||(a_hat - A*) Sxx^{1/2}||_F^2, evaluated as tr(D Sxx D^T).
double exact_excess_risk(const Mat& a_hat, const TaskSpec& task);

RiskReport risk_report(const FineTuneEstimate& est, const TaskSpec& task, Index n);

struct FftUnderTerms {
  double bias = 0.0;         // ||Delta* P_X^perp Sxx^{1/2}||_F^2
  double variance_mc = 0.0;  // (1/n) tr(See) tr(Sxx Sxx_hat^+)
};

/// Per-realization FFT bias and noise-averaged variance for n < dx.
/// Averaging both over seeds estimates the two expected terms.
FftUnderTerms fft_under_decomposition(const TaskSpec& task, const Dataset& data);

/// tr(See) dx / (n - dx - 1); RegimeError unless n > dx + 1.
double fft_over_gaussian_closed_form(double trace_sigma_ee, Index dx, Index n);

struct FftUnderClosedForm {
  double bias = 0.0;
  double variance = 0.0;
};

/// Isotropic features: bias ||Delta*||^2 (dx - n)/dx and variance
/// tr(See) n / (dx - n - 1). RegimeError unless n < dx - 1.
FftUnderClosedForm fft_under_gaussian_closed_form(double delta_star_fro_sq, double trace_sigma_ee,
                                                  Index dx, Index n);

/// avg_noise_var * dx * dy / n, valid for n >= dx.
double fft_over_lower_bound(double avg_noise_var, Index dx, Index dy, Index n);

/// r max{dx,dy} (sqrt n - sqrt dx)^-2 lmax (overdetermined) or
/// r max{n,dy} (sqrt dx - sqrt n)^-2 lmax (underdetermined).
/// ThresholdError at n == dx, RegimeError if `regime` disagrees with (n, dx).
double lora_variance_asymptotic(Regime regime, Index r, Index dx, Index dy, Index n,
                                double lmax_sigma_ee);

/// lambda_min(Sxx) * sum_{i>r} sigma_i(Delta*)^2.
double inevitable_error_lower_bound(const TaskSpec& task, Index r);

/// Sum of squared singular values of `s` past index r, up to index `limit`.
double spectral_tail(const Vec& singular_values, Index r, Index limit);

enum class ConstantsProfile { kAppendixExplicit, kUnit };

std::string to_string(ConstantsProfile p);

/// Monte Carlo estimates over fresh X draws of the feature-only expectations
/// that enter the LoRA bound. They depend on (Sxx, n) but not on Delta* or
/// the noise, so one estimate serves every rank and every task sharing Sxx.
struct BoundExpectations {
  Regime regime = Regime::kOverdetermined;
  Index n = 0;
  Index draws = 0;
  /// E[lambda_max(Sxx Sxx_hat^{-1})], or with the pseudoinverse when n < dx.
  double lmax_ratio = 0.0;
  /// E[lambda_max(Sxx_hat) lambda_max(Sxx Sxx_hat^{-1 or +})].
  double lmax_product = 0.0;
  /// E[P_X^perp Sxx P_X^perp] (underdetermined only; zero otherwise), so
  /// E||Delta* P_X^perp Sxx^{1/2}||^2 = tr(Delta* M Delta*^T).
  Mat perp_cov;
  /// Overdetermined draws rejected because Sxx_hat was numerically singular.
  Index singular_resamples = 0;
};

BoundExpectations estimate_bound_expectations(Regime regime, const Mat& sigma_xx, Index n,
                                              Index mc_draws, RngHandle rng);

struct BoundReport {
  Regime regime = Regime::kOverdetermined;
  double variance_term = 0.0;
  double trunc_bias_terms = 0.0;
  double subspace_bias_term = 0.0;
  double total = 0.0;
  ConstantsProfile constants_profile = ConstantsProfile::kAppendixExplicit;
};

/// Evaluates the LoRA excess-risk upper bound from precomputed expectations.
/// Throws RegimeError unless n >= dx > r (overdetermined) or r < n < dx
/// (underdetermined).
BoundReport lora_bound(const BoundExpectations& ex, const TaskSpec& task, Index r,
                       ConstantsProfile profile = ConstantsProfile::kAppendixExplicit);

BoundReport lora_bound(Regime regime, const TaskSpec& task, Index r, Index n, Index mc_draws,
                       RngHandle rng,
                       ConstantsProfile profile = ConstantsProfile::kAppendixExplicit);

}  // namespace lrft
