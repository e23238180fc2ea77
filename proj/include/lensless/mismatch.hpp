#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lensless/core.hpp"
#include "lensless/forward.hpp"
#include "lensless/recover.hpp"

namespace lensless::mismatch {

/// noisy = clean + model_mismatch + noise_amplification + residual.
struct MismatchTerms {
  Eigen::VectorXd noisy_estimate;
  Eigen::VectorXd clean_estimate;
  Eigen::VectorXd model_mismatch;
  Eigen::VectorXd noise_amplification;
  Eigen::VectorXd residual;

  /// |residual| / |noisy_estimate| (absolute norm if the estimate is zero).
  double relative_residual() const;
};

inline constexpr double kMaxCondition = 1e10;

/// Estimate with H_hat = H + delta from y = C H x + n, split around the
/// first-order expansion. Requires square C H, cond < 1e10 and
/// spectral radius of (CH)^-1 (C delta) < 1.
MismatchTerms direct_inversion_decomposition(const forward::DenseSystem& sys,
                                             const Eigen::VectorXd& x, const Eigen::VectorXd& n);

struct ScalingProbe {
  std::vector<double> delta_norms;     // Frobenius norm of each scaled delta
  std::vector<double> residual_norms;
  double slope = 0.0;                  // least-squares log-log slope
};

/// Direct-inversion residual at delta, delta/2, ..., delta/2^octaves.
ScalingProbe direct_inversion_scaling(const forward::DenseSystem& sys, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& n, std::size_t octaves = 3);

/// Least-squares slope of log(ys) against log(xs).
double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys);

struct WienerDecomposition {
  ComplexField noisy;
  ComplexField clean;
  ComplexField model_mismatch;       // M P X
  ComplexField noise_amplification;  // M N
  ComplexField residual;
  ComplexField M;
  double relative_residual = 0.0;
};

/// Y = P X + N filtered with P (clean) and P + delta_P (noisy).
/// `reg` is the scalar K or a real grid with the field's dims.
WienerDecomposition wiener_decomposition(const ComplexField& P, const ComplexField& delta_P,
                                         const ComplexField& X, const ComplexField& N,
                                         const recover::WienerParams& reg);

/// One gradient step x_prev - alpha A^T (A x_prev - y), clean with A = C H and
/// noisy with A = C H_hat.
MismatchTerms gd_step_decomposition(const forward::DenseSystem& sys, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& n, const Eigen::VectorXd& x_prev,
                                    double alpha);

struct ProxMismatch {
  MismatchTerms terms;
  /// Elements zeroed by the shrinkage in both the clean and the noisy step.
  std::vector<bool> discarded;
  double discarded_fraction = 0.0;
};

/// gd_step_decomposition followed by soft-thresholding both paths at beta.
ProxMismatch prox_step_mismatch(const forward::DenseSystem& sys, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& n, const Eigen::VectorXd& x_prev,
                                double alpha, double beta);

/// State of an ADMM iteration on y = C H x + n with splits
///   v = H x   (rho_x, dual eta),  z = C x  (rho_z, dual zeta),  w = x  (rho_y, dual omega).
/// Both paths start from the same state.
struct AdmmStepContext {
  Eigen::MatrixXd H;      // d x d
  Eigen::MatrixXd delta;  // H_hat = H + delta
  Eigen::MatrixXd C;      // m x d selection
  double rho_x = 1.0;
  double rho_y = 1.0;
  double rho_z = 1.0;
  Eigen::VectorXd x;       // scene, d
  Eigen::VectorXd n;       // noise, m
  Eigen::VectorXd x_prev;  // d
  Eigen::VectorXd eta;     // d
  Eigen::VectorXd z;       // m
  Eigen::VectorXd zeta;    // m
  Eigen::VectorXd w;       // d
  Eigen::VectorXd omega;   // d

  void validate() const;
};

struct AdmmStepDecomposition {
  MismatchTerms terms;
  Eigen::MatrixXd W1, W2, W3, W4;
  Eigen::MatrixXd delta_H;  // H_hat^T H_hat - H^T H
  Eigen::VectorXd gamma;
};

/// One v-update then x-update on each path; the remaining terms come from
///   W1 = rho_x H_hat^T H_hat + rho_z C^T C + rho_y I,  K = (C^T C + rho_x I)^-1,
///   W2 = (W1 - rho_x dH)^-1 delta^T rho_x K,
///   W3 = (W1 - rho_x dH)^-1 H_hat^T rho_x^2 K delta x_prev,
///   W4 = I - W1^-1 rho_x dH,
///   gamma = rho_x H x_prev + eta - (C^T C + rho_x I) eta / rho_x,
///   noisy = clean + W4 W2 C^T n
///         + [-W1^-1 rho_x dH clean + W4 W2 (C^T C H x + gamma) + W4 W3].
AdmmStepDecomposition admm_step_decomposition(const AdmmStepContext& ctx);

/// Uniform [-1, 1) entries from a seeded stream.
Eigen::MatrixXd random_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols);

/// Well-conditioned H (identity plus a small random part) and a delta of the
/// given Frobenius norm.
forward::DenseSystem random_system(std::uint64_t seed, Eigen::Index dim, double delta_norm);

AdmmStepContext random_admm_context(std::uint64_t seed, Eigen::Index dim, Eigen::Index sensor_rows,
                                    double delta_norm);

struct AuditSummary {
  std::size_t trials = 0;
  double wiener_max_residual = 0.0;
  double gd_max_residual = 0.0;
  double admm_max_residual = 0.0;
  double admm_cropped_max_residual = 0.0;
  std::vector<double> direct_slopes;
  double mean_mismatch_norm = 0.0;
  double mean_noise_amplification_norm = 0.0;
};

/// Runs every decomposition on `trials` random instances.
AuditSummary run_audit(std::uint64_t seed, std::size_t trials);
std::string to_json(const AuditSummary& summary);

}  // namespace lensless::mismatch
