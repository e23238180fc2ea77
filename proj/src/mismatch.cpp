#include "lensless/mismatch.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "lensless/error.hpp"
#include "lensless/scenes.hpp"

namespace lensless::mismatch {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double condition_number(const MatrixXd& m) {
  const Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0.0;
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

void require_conditioned(const MatrixXd& m, const char* what) {
  const double c = condition_number(m);
  if (!(c < kMaxCondition)) {
    throw NumericalError(std::string(what) + " is ill-conditioned (cond " + std::to_string(c) + ")");
  }
}

MismatchTerms finish(VectorXd noisy, VectorXd clean, VectorXd mismatch, VectorXd noise) {
  MismatchTerms t;
  t.residual = noisy - clean - mismatch - noise;
  t.noisy_estimate = std::move(noisy);
  t.clean_estimate = std::move(clean);
  t.model_mismatch = std::move(mismatch);
  t.noise_amplification = std::move(noise);
  return t;
}

// Effective operators A = C H and A_hat = C H_hat.
struct Operators {
  MatrixXd A;
  MatrixXd A_hat;
  MatrixXd D;  // C delta
};

Operators effective(const forward::DenseSystem& sys) {
  sys.validate();
  Operators op;
  const MatrixXd delta = sys.delta ? *sys.delta : MatrixXd::Zero(sys.H.rows(), sys.H.cols());
  if (sys.crop) {
    op.A = *sys.crop * sys.H;
    op.D = *sys.crop * delta;
  } else {
    op.A = sys.H;
    op.D = delta;
  }
  op.A_hat = op.A + op.D;
  return op;
}

void require_size(const VectorXd& v, Eigen::Index n, const char* what) {
  if (v.size() != n) throw InputError(std::string(what) + ": dimension mismatch");
}

class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : engine_(seed) {}
  double operator()() { return 2.0 * (static_cast<double>(engine_() >> 11) * 0x1.0p-53) - 1.0; }

 private:
  std::mt19937_64 engine_;
};

VectorXd random_vector(std::uint64_t seed, Eigen::Index n) { return random_matrix(seed, n, 1).col(0); }

}  // namespace

double MismatchTerms::relative_residual() const {
  const double denom = noisy_estimate.norm();
  return denom > 0.0 ? residual.norm() / denom : residual.norm();
}

MismatchTerms direct_inversion_decomposition(const forward::DenseSystem& sys, const VectorXd& x,
                                             const VectorXd& n) {
  const Operators op = effective(sys);
  if (op.A.rows() != op.A.cols()) throw InputError("direct_inversion_decomposition: C H must be square");
  require_size(x, op.A.cols(), "direct_inversion_decomposition x");
  require_size(n, op.A.rows(), "direct_inversion_decomposition n");
  require_conditioned(op.A, "direct_inversion_decomposition: H");
  require_conditioned(op.A_hat, "direct_inversion_decomposition: H_hat");

  const Eigen::PartialPivLU<MatrixXd> lu(op.A);
  const MatrixXd E = lu.solve(op.D);  // H^-1 delta
  const double radius = E.eigenvalues().cwiseAbs().maxCoeff();
  if (!(radius < 1.0)) {
    throw NumericalError("direct_inversion_decomposition: spectral radius of H^-1 delta is " +
                         std::to_string(radius) + " (must be < 1)");
  }

  const VectorXd y = op.A * x + n;
  VectorXd noisy = op.A_hat.partialPivLu().solve(y);
  const VectorXd h_inv_n = lu.solve(n);
  VectorXd mismatch = -E * x;
  VectorXd noise = h_inv_n - E * h_inv_n;
  return finish(std::move(noisy), x, std::move(mismatch), std::move(noise));
}

double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw InputError("loglog_slope: need >= 2 paired points");
  double mx = 0.0, my = 0.0;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw InputError("loglog_slope: values must be > 0");
    lx.push_back(std::log(xs[i]));
    ly.push_back(std::log(ys[i]));
    mx += lx.back();
    my += ly.back();
  }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw InputError("loglog_slope: xs are all equal");
  return sxy / sxx;
}

ScalingProbe direct_inversion_scaling(const forward::DenseSystem& sys, const VectorXd& x,
                                      const VectorXd& n, std::size_t octaves) {
  if (!sys.delta) throw InputError("direct_inversion_scaling: system has no delta");
  if (octaves == 0) throw InputError("direct_inversion_scaling: octaves must be >= 1");
  ScalingProbe probe;
  forward::DenseSystem scaled = sys;
  for (std::size_t k = 0; k <= octaves; ++k) {
    scaled.delta = *sys.delta / std::ldexp(1.0, static_cast<int>(k));
    const auto terms = direct_inversion_decomposition(scaled, x, n);
    probe.delta_norms.push_back(scaled.delta->norm());
    probe.residual_norms.push_back(terms.residual.norm());
  }
  probe.slope = loglog_slope(probe.delta_norms, probe.residual_norms);
  return probe;
}

WienerDecomposition wiener_decomposition(const ComplexField& P, const ComplexField& delta_P,
                                         const ComplexField& X, const ComplexField& N,
                                         const recover::WienerParams& reg) {
  reg.validate();
  const std::size_t h = P.height(), w = P.width();
  for (const ComplexField* f : {&delta_P, &X, &N}) {
    if (f->height() != h || f->width() != w) throw InputError("wiener_decomposition: field shapes differ");
  }
  const RealImage* grid = std::get_if<RealImage>(&reg.reg);
  if (grid && (grid->height() != h || grid->width() != w || grid->channels() != 1)) {
    throw InputError("wiener_decomposition: reg grid must match the field dims with 1 channel");
  }

  WienerDecomposition out{ComplexField(h, w), ComplexField(h, w), ComplexField(h, w),
                          ComplexField(h, w), ComplexField(h, w), ComplexField(h, w)};
  const auto p = P.samples(), dp = delta_P.samples(), xs = X.samples(), ns = N.samples();
  double res2 = 0.0, noisy2 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = grid ? grid->samples()[i] : std::get<double>(reg.reg);
    const double B = std::norm(p[i]) + r;
    const std::complex<double> dB = std::norm(dp[i]) + std::conj(dp[i]) * p[i] + std::conj(p[i]) * dp[i];
    const std::complex<double> noisy_denom = B + dB;
    if (!(B > 0.0) || std::abs(noisy_denom) == 0.0) {
      throw NumericalError("wiener_decomposition: zero denominator at bin " + std::to_string(i));
    }
    const auto Y = p[i] * xs[i] + ns[i];
    const auto M = std::conj(dp[i]) / B - dB * (std::conj(p[i]) + std::conj(dp[i])) / (B * B + B * dB);
    out.M.samples()[i] = M;
    out.clean.samples()[i] = std::conj(p[i]) * Y / B;
    out.noisy.samples()[i] = std::conj(p[i] + dp[i]) * Y / (std::norm(p[i] + dp[i]) + r);
    out.model_mismatch.samples()[i] = M * p[i] * xs[i];
    out.noise_amplification.samples()[i] = M * ns[i];
    const auto res = out.noisy.samples()[i] - out.clean.samples()[i] - out.model_mismatch.samples()[i] -
                     out.noise_amplification.samples()[i];
    out.residual.samples()[i] = res;
    res2 += std::norm(res);
    noisy2 += std::norm(out.noisy.samples()[i]);
  }
  out.relative_residual = noisy2 > 0.0 ? std::sqrt(res2 / noisy2) : std::sqrt(res2);
  return out;
}

MismatchTerms gd_step_decomposition(const forward::DenseSystem& sys, const VectorXd& x, const VectorXd& n,
                                    const VectorXd& x_prev, double alpha) {
  if (!(alpha > 0.0)) throw InputError("gd_step_decomposition: alpha must be > 0");
  const Operators op = effective(sys);
  require_size(x, op.A.cols(), "gd_step_decomposition x");
  require_size(x_prev, op.A.cols(), "gd_step_decomposition x_prev");
  require_size(n, op.A.rows(), "gd_step_decomposition n");

  const VectorXd y = op.A * x + n;
  VectorXd clean = x_prev - alpha * op.A.transpose() * (op.A * x_prev - y);
  VectorXd noisy = x_prev - alpha * op.A_hat.transpose() * (op.A_hat * x_prev - y);
  const MatrixXd dH = op.D.transpose() * op.A + op.A_hat.transpose() * op.D;
  VectorXd mismatch = alpha * (op.D.transpose() * (op.A * x) - dH * x_prev);
  VectorXd noise = alpha * (op.D.transpose() * n);
  return finish(std::move(noisy), std::move(clean), std::move(mismatch), std::move(noise));
}

ProxMismatch prox_step_mismatch(const forward::DenseSystem& sys, const VectorXd& x, const VectorXd& n,
                                const VectorXd& x_prev, double alpha, double beta) {
  if (!(beta >= 0.0)) throw InputError("prox_step_mismatch: beta must be >= 0");
  const MismatchTerms step = gd_step_decomposition(sys, x, n, x_prev, alpha);
  VectorXd clean = step.clean_estimate;
  VectorXd noisy = step.noisy_estimate;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    clean(i) = recover::soft_threshold(clean(i), beta);
    noisy(i) = recover::soft_threshold(noisy(i), beta);
  }
  ProxMismatch out;
  out.discarded.resize(static_cast<std::size_t>(clean.size()));
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    const bool both_zero = clean(i) == 0.0 && noisy(i) == 0.0;
    out.discarded[static_cast<std::size_t>(i)] = both_zero;
    count += both_zero ? 1 : 0;
  }
  out.discarded_fraction = clean.size() > 0 ? static_cast<double>(count) / static_cast<double>(clean.size()) : 0.0;
  out.terms = finish(std::move(noisy), std::move(clean), step.model_mismatch, step.noise_amplification);
  return out;
}

void AdmmStepContext::validate() const {
  const Eigen::Index d = H.rows();
  if (H.cols() != d || d == 0) throw InputError("AdmmStepContext: H must be square and non-empty");
  if (delta.rows() != d || delta.cols() != d) throw InputError("AdmmStepContext: delta must match H");
  const Eigen::Index m = C.rows();
  if (C.cols() != d || m == 0) throw InputError("AdmmStepContext: C must be m x d");
  if (!(rho_x > 0.0) || !(rho_y > 0.0) || !(rho_z > 0.0)) throw InputError("AdmmStepContext: penalties must be > 0");
  for (const VectorXd* v : {&x, &x_prev, &eta, &w, &omega}) require_size(*v, d, "AdmmStepContext");
  for (const VectorXd* v : {&n, &z, &zeta}) require_size(*v, m, "AdmmStepContext");
}

AdmmStepDecomposition admm_step_decomposition(const AdmmStepContext& ctx) {
  ctx.validate();
  const Eigen::Index d = ctx.H.rows();
  const MatrixXd I = MatrixXd::Identity(d, d);
  const MatrixXd& H = ctx.H;
  const MatrixXd H_hat = H + ctx.delta;
  const MatrixXd CtC = ctx.C.transpose() * ctx.C;
  const double rx = ctx.rho_x;

  AdmmStepDecomposition out;
  out.delta_H = ctx.delta.transpose() * H + H_hat.transpose() * ctx.delta;
  out.W1 = rx * H_hat.transpose() * H_hat + ctx.rho_z * CtC + ctx.rho_y * I;
  const MatrixXd W1_clean = out.W1 - rx * out.delta_H;
  require_conditioned(out.W1, "admm_step_decomposition: W1");
  require_conditioned(W1_clean, "admm_step_decomposition: W1 - rho_x dH");

  const Eigen::PartialPivLU<MatrixXd> w1(out.W1);
  const Eigen::PartialPivLU<MatrixXd> w1c(W1_clean);
  const MatrixXd K = (CtC + rx * I).inverse();  // diagonal for a selection C

  const VectorXd y = ctx.C * (H * ctx.x) + ctx.n;
  const VectorXd bundle = ctx.C.transpose() * (ctx.rho_z * ctx.z - ctx.zeta) + ctx.rho_y * ctx.w - ctx.omega;

  auto x_update = [&](const MatrixXd& G, const Eigen::PartialPivLU<MatrixXd>& solver) {
    const VectorXd v = K * (ctx.C.transpose() * y + rx * G * ctx.x_prev + ctx.eta);
    return VectorXd(solver.solve(G.transpose() * (rx * v - ctx.eta) + bundle));
  };
  VectorXd clean = x_update(H, w1c);
  VectorXd noisy = x_update(H_hat, w1);

  out.W2 = w1c.solve(ctx.delta.transpose() * rx * K);
  out.W3 = w1c.solve(H_hat.transpose() * (rx * rx) * K * ctx.delta * ctx.x_prev);
  out.W4 = I - w1.solve(rx * out.delta_H);
  out.gamma = rx * H * ctx.x_prev + ctx.eta - (CtC + rx * I) * ctx.eta / rx;

  VectorXd noise = out.W4 * out.W2 * ctx.C.transpose() * ctx.n;
  VectorXd mismatch = -w1.solve(rx * out.delta_H * clean) +
                      out.W4 * out.W2 * (CtC * H * ctx.x + out.gamma) + out.W4 * out.W3;
  out.terms = finish(std::move(noisy), std::move(clean), std::move(mismatch), std::move(noise));
  return out;
}

MatrixXd random_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
  Uniform u(seed);
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u();
  }
  return m;
}

forward::DenseSystem random_system(std::uint64_t seed, Eigen::Index dim, double delta_norm) {
  forward::DenseSystem sys;
  sys.H = MatrixXd::Identity(dim, dim) + 0.3 * random_matrix(bench::derive_seed(seed, 0), dim, dim) /
                                            std::sqrt(static_cast<double>(dim));
  MatrixXd delta = random_matrix(bench::derive_seed(seed, 1), dim, dim);
  sys.delta = delta * (delta_norm / delta.norm());
  return sys;
}

AdmmStepContext random_admm_context(std::uint64_t seed, Eigen::Index dim, Eigen::Index sensor_rows,
                                    double delta_norm) {
  if (sensor_rows <= 0 || sensor_rows > dim) throw InputError("random_admm_context: need 0 < sensor_rows <= dim");
  const auto sys = random_system(seed, dim, delta_norm);
  AdmmStepContext ctx;
  ctx.H = sys.H;
  ctx.delta = *sys.delta;
  ctx.C = MatrixXd::Identity(dim, dim).topRows(sensor_rows);
  auto vec = [&](std::uint64_t cell, Eigen::Index n) { return random_vector(bench::derive_seed(seed, cell), n); };
  ctx.x = vec(2, dim);
  ctx.n = 0.1 * vec(3, sensor_rows);
  ctx.x_prev = vec(4, dim);
  ctx.eta = vec(5, dim);
  ctx.z = vec(6, sensor_rows);
  ctx.zeta = vec(7, sensor_rows);
  ctx.w = vec(8, dim);
  ctx.omega = vec(9, dim);
  return ctx;
}

AuditSummary run_audit(std::uint64_t seed, std::size_t trials) {
  AuditSummary s;
  s.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t base = bench::derive_seed(seed, t);

    ComplexField P(16, 16), dP(16, 16), X(16, 16), N(16, 16);
    Uniform u(bench::derive_seed(base, 100));
    for (auto* f : {&P, &dP, &X, &N}) {
      for (auto& v : f->samples()) v = {u(), u()};
    }
    for (auto& v : dP.samples()) v *= 0.1;
    for (auto& v : N.samples()) v *= 0.1;
    s.wiener_max_residual = std::max(
        s.wiener_max_residual, wiener_decomposition(P, dP, X, N, recover::WienerParams{0.1}).relative_residual);

    const auto sys = random_system(bench::derive_seed(base, 101), 10, 0.1);
    const VectorXd x = random_vector(bench::derive_seed(base, 102), 10);
    const VectorXd n = 0.01 * random_vector(bench::derive_seed(base, 103), 10);
    const VectorXd x_prev = random_vector(bench::derive_seed(base, 104), 10);
    const auto gd = gd_step_decomposition(sys, x, n, x_prev, 0.5);
    s.gd_max_residual = std::max(s.gd_max_residual, gd.relative_residual());

    const auto direct = direct_inversion_decomposition(sys, x, n);
    s.mean_mismatch_norm += direct.model_mismatch.norm() / static_cast<double>(trials);
    s.mean_noise_amplification_norm += direct.noise_amplification.norm() / static_cast<double>(trials);
    s.direct_slopes.push_back(direct_inversion_scaling(sys, x, VectorXd::Zero(10), 3).slope);

    const auto full = admm_step_decomposition(random_admm_context(bench::derive_seed(base, 105), 8, 8, 0.2));
    s.admm_max_residual = std::max(s.admm_max_residual, full.terms.relative_residual());
    const auto cropped = admm_step_decomposition(random_admm_context(bench::derive_seed(base, 106), 8, 4, 0.2));
    s.admm_cropped_max_residual = std::max(s.admm_cropped_max_residual, cropped.terms.relative_residual());
  }
  return s;
}

std::string to_json(const AuditSummary& s) {
  nlohmann::ordered_json doc;
  doc["trials"] = s.trials;
  doc["wiener"]["max_relative_residual"] = s.wiener_max_residual;
  doc["gd_step"]["max_relative_residual"] = s.gd_max_residual;
  doc["admm_step"]["max_relative_residual"] = s.admm_max_residual;
  doc["admm_step"]["cropped_max_relative_residual"] = s.admm_cropped_max_residual;
  doc["direct_inversion"]["mean_mismatch_norm"] = s.mean_mismatch_norm;
  doc["direct_inversion"]["mean_noise_amplification_norm"] = s.mean_noise_amplification_norm;
  doc["direct_inversion"]["scaling_slopes"] = s.direct_slopes;
  return doc.dump(2) + "\n";
}

}  // namespace lensless::mismatch
