#include "lensless/recover.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace lensless::recover {

double soft_threshold(double v, double beta) {
  const double mag = std::abs(v) - beta;
  if (mag <= 0.0) return 0.0;
  return v < 0.0 ? -mag : mag;
}

std::vector<double> soft_threshold(std::span<const double> v, double beta) {
  if (!(beta >= 0.0)) throw InputError("soft_threshold: beta must be >= 0");
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [beta](double e) { return soft_threshold(e, beta); });
  return out;
}

// -- TV ----------------------------------------------------------------------

Gradient TvOps::apply(const RealImage& x) {
  const std::size_t h = x.height(), w = x.width(), nc = x.channels();
  Gradient g{RealImage(h, w, nc), RealImage(h, w, nc)};
  g.dy.signed_intermediate = g.dx.signed_intermediate = true;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < nc; ++ch) {
        const double v = x.at(r, c, ch);
        if (r + 1 < h) g.dy.at(r, c, ch) = x.at(r + 1, c, ch) - v;
        if (c + 1 < w) g.dx.at(r, c, ch) = x.at(r, c + 1, ch) - v;
      }
    }
  }
  return g;
}

RealImage TvOps::adjoint(const Gradient& g) {
  const std::size_t h = g.dy.height(), w = g.dy.width(), nc = g.dy.channels();
  if (!g.dy.same_shape(g.dx)) throw InputError("TvOps::adjoint: gradient shape mismatch");
  RealImage out(h, w, nc);
  out.signed_intermediate = true;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (std::size_t ch = 0; ch < nc; ++ch) {
        double v = 0.0;
        if (r >= 1) v += g.dy.at(r - 1, c, ch);
        if (r + 1 < h) v -= g.dy.at(r, c, ch);
        if (c >= 1) v += g.dx.at(r, c - 1, ch);
        if (c + 1 < w) v -= g.dx.at(r, c, ch);
        out.at(r, c, ch) = v;
      }
    }
  }
  return out;
}

namespace {

RealImage difference(const RealImage& a, const RealImage& b) {
  RealImage out = a;
  out.signed_intermediate = true;
  auto o = out.samples();
  auto s = b.samples();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= s[i];
  return out;
}

double l1_norm(const Gradient& g) {
  double s = 0.0;
  for (double v : g.dy.samples()) s += std::abs(v);
  for (double v : g.dx.samples()) s += std::abs(v);
  return s;
}

// Fast gradient projection on the dual of min 0.5|x - v|^2 + weight |Dx|_1.
// `dual` carries a warm start in and the final dual out.
RealImage prox_tv_dual(const RealImage& v, double weight, Gradient& dual,
                       std::size_t max_iterations, double tolerance) {
  constexpr double kStep = 1.0 / 8.0;  // |D|^2 <= 8 for 2-D forward differences
  Gradient q = dual;
  double t = 1.0;
  auto clip = [weight](double e) { return std::clamp(e, -weight, weight); };
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const RealImage residual = difference(v, TvOps::adjoint(q));
    const Gradient step = TvOps::apply(residual);
    Gradient next = q;
    double change = 0.0, norm = 0.0;
    auto update = [&](RealImage& out, const RealImage& qs, const RealImage& ss,
                      const RealImage& prev) {
      auto o = out.samples();
      auto a = qs.samples();
      auto b = ss.samples();
      auto p = prev.samples();
      for (std::size_t i = 0; i < o.size(); ++i) {
        o[i] = clip(a[i] + kStep * b[i]);
        change += (o[i] - p[i]) * (o[i] - p[i]);
        norm += o[i] * o[i];
      }
    };
    update(next.dy, q.dy, step.dy, dual.dy);
    update(next.dx, q.dx, step.dx, dual.dx);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    auto extrapolate = [momentum](RealImage& out, const RealImage& cur, const RealImage& prev) {
      auto o = out.samples();
      auto a = cur.samples();
      auto b = prev.samples();
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + momentum * (a[i] - b[i]);
    };
    extrapolate(q.dy, next.dy, dual.dy);
    extrapolate(q.dx, next.dx, dual.dx);
    dual = std::move(next);
    t = t_next;
    if (change <= tolerance * tolerance * std::max(norm, 1e-300)) break;
  }
  return difference(v, TvOps::adjoint(dual));
}

}  // namespace

RealImage prox_tv(const RealImage& v, double weight, std::size_t max_iterations,
                  double tolerance) {
  if (!(weight >= 0.0)) throw InputError("prox_tv: weight must be >= 0");
  if (weight == 0.0) return v;
  Gradient dual{RealImage(v.height(), v.width(), v.channels()),
                RealImage(v.height(), v.width(), v.channels())};
  RealImage out = prox_tv_dual(v, weight, dual, max_iterations, tolerance);
  out.signed_intermediate = true;
  return out;
}

// -- Wiener ------------------------------------------------------------------

void WienerParams::validate() const {
  if (const auto* k = std::get_if<double>(&reg)) {
    if (!(*k >= 0.0) || !std::isfinite(*k)) throw InputError("WienerParams: reg must be >= 0");
  } else {
    const auto& grid = std::get<RealImage>(reg);
    if (grid.channels() != 1) throw InputError("WienerParams: reg grid must have one channel");
    for (double v : grid.samples()) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw InputError("WienerParams: reg must be >= 0");
    }
  }
}

RealImage wiener_filter(const RealImage& meas, const optics::Psf& psf,
                        const WienerParams& params) {
  params.validate();
  if (meas.channels() != psf.channels()) throw InputError("wiener_filter: channel mismatch");
  const forward::LsiOperator op(psf, meas.height(), meas.width());
  const auto* grid = std::get_if<RealImage>(&params.reg);
  if (grid && (grid->height() != op.padded_height() || grid->width() != op.padded_width())) {
    throw InputError("wiener_filter: reg grid must be " + std::to_string(op.padded_height()) +
                     "x" + std::to_string(op.padded_width()));
  }
  RealImage out(meas.height(), meas.width(), meas.channels());
  out.signed_intermediate = true;
  for (std::size_t ch = 0; ch < meas.channels(); ++ch) {
    ComplexField spec = fft2(op.embed(meas.channel(ch)));
    const auto p = op.spectrum(ch).samples();
    auto y = spec.samples();
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double r = grid ? grid->samples()[i] : std::get<double>(params.reg);
      const double denom = std::norm(p[i]) + r;
      if (denom == 0.0) throw NumericalError("wiener_filter: singular frequency bin (|P|^2 + R = 0)");
      y[i] = std::conj(p[i]) * y[i] / denom;
    }
    out.set_channel(ch, op.extract(ifft2(spec)));
  }
  return out;
}

// -- direct inversion --------------------------------------------------------

Eigen::VectorXd direct_inverse(const forward::DenseSystem& sys, const Eigen::VectorXd& y) {
  sys.validate();
  Eigen::MatrixXd A = sys.estimate();
  if (sys.crop) A = *sys.crop * A;
  if (A.rows() != A.cols()) throw InputError("direct_inverse: system is not square");
  if (y.size() != A.rows()) throw InputError("direct_inverse: y has the wrong length");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  if (!(smin > 0.0) || s(0) / smin > kMaxConditionNumber) {
    throw NumericalError("direct_inverse: matrix is singular or near-singular (condition " +
                         std::to_string(smin > 0.0 ? s(0) / smin : INFINITY) + ")");
  }
  return Eigen::PartialPivLU<Eigen::MatrixXd>(A).solve(y);
}

// -- proximal gradient -------------------------------------------------------

void IstaParams::validate() const {
  if (alpha && !(*alpha > 0.0)) throw InputError("IstaParams: alpha must be > 0");
  if (!(beta >= 0.0)) throw InputError("IstaParams: beta must be >= 0");
  if (iterations == 0) throw InputError("IstaParams: iterations must be >= 1");
}

double lipschitz_estimate(const forward::LsiOperator& op, std::size_t iterations) {
  RealImage v(op.scene_height(), op.scene_width(), op.channels(), 1.0);
  v.signed_intermediate = true;
  double estimate = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double norm = std::sqrt(v.energy());
    if (norm == 0.0) return 0.0;
    for (auto& e : v.samples()) e /= norm;
    v = op.adjoint(op.apply(v));
    estimate = std::sqrt(v.energy());
  }
  return estimate;
}

double tv_objective(const forward::LsiOperator& op, const RealImage& x, const RealImage& y,
                    double beta) {
  const RealImage r = difference(op.apply(x), y);
  return 0.5 * r.energy() + (beta > 0.0 ? beta * l1_norm(TvOps::apply(x)) : 0.0);
}

RealImage fista_tv(const RealImage& meas, const optics::Psf& psf, const IstaParams& params,
                   SolveReport* report) {
  params.validate();
  if (meas.channels() != psf.channels()) throw InputError("fista_tv: channel mismatch");
  const forward::LsiOperator op(psf, meas.height(), meas.width());
  SolveReport local;
  SolveReport& rep = report ? *report : local;
  rep = {};
  rep.lipschitz = lipschitz_estimate(op);
  if (!(rep.lipschitz > 0.0)) throw NumericalError("fista_tv: PSF has zero energy");
  const double bound = 1.0 / rep.lipschitz;
  rep.alpha = params.alpha.value_or(bound);
  if (rep.alpha > bound) {
    rep.warnings.push_back("fista_tv: alpha " + std::to_string(rep.alpha) +
                           " exceeds 1/L = " + std::to_string(bound) + "; backing off to 1/L");
    rep.alpha = bound;
  }

  const std::size_t h = meas.height(), w = meas.width(), nc = meas.channels();
  RealImage x(h, w, nc);
  x.signed_intermediate = true;
  RealImage z = x;
  Gradient dual{RealImage(h, w, nc), RealImage(h, w, nc)};
  double t = 1.0;
  const double threshold = rep.alpha * params.beta;
  rep.objective.push_back(tv_objective(op, x, meas, params.beta));

  for (std::size_t k = 0; k < params.iterations; ++k) {
    const RealImage grad = op.adjoint(difference(op.apply(z), meas));
    RealImage v = z;
    {
      auto vs = v.samples();
      auto gs = grad.samples();
      for (std::size_t i = 0; i < vs.size(); ++i) vs[i] -= rep.alpha * gs[i];
    }
    RealImage next = threshold > 0.0 ? prox_tv_dual(v, threshold, dual, 500, 1e-12) : v;
    next.signed_intermediate = true;
    for (double e : next.samples()) {
      if (!std::isfinite(e)) {
        throw NumericalError("fista_tv: non-finite iterate at iteration " + std::to_string(k + 1));
      }
    }
    if (params.accelerated) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      const double momentum = (t - 1.0) / t_next;
      auto zs = z.samples();
      auto ns = next.samples();
      auto xs = x.samples();
      for (std::size_t i = 0; i < zs.size(); ++i) zs[i] = ns[i] + momentum * (ns[i] - xs[i]);
      t = t_next;
    } else {
      z = next;
    }
    x = std::move(next);
    rep.objective.push_back(tv_objective(op, x, meas, params.beta));
  }
  return x;
}

// -- ADMM --------------------------------------------------------------------

void AdmmParams::validate() const {
  if (iterations == 0) throw InputError("AdmmParams: iterations must be >= 1");
  auto check = [](const AdmmStage& s) {
    if (!(s.mu1 > 0.0) || !(s.mu2 > 0.0) || !(s.mu3 > 0.0) || !(s.tau > 0.0)) {
      throw InputError("AdmmParams: mu1, mu2, mu3 and tau must be > 0");
    }
  };
  check({mu1, mu2, mu3, tau});
  if (!(psf_gain >= 0.0) || !(data_peak >= 0.0)) {
    throw InputError("AdmmParams: psf_gain and data_peak must be >= 0");
  }
  if (!schedule.empty()) {
    if (schedule.size() != iterations) {
      throw InputError("AdmmParams: schedule needs one entry per iteration");
    }
    for (const auto& s : schedule) check(s);
  }
}

namespace {

// Circular forward differences on the padded canvas; diagonal in Fourier.
struct CircularGradient {
  std::size_t h, w;

  void apply(const std::vector<double>& x, std::vector<double>& gy, std::vector<double>& gx) const {
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t rn = (r + 1) % h;
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t cn = (c + 1) % w;
        gy[r * w + c] = x[rn * w + c] - x[r * w + c];
        gx[r * w + c] = x[r * w + cn] - x[r * w + c];
      }
    }
  }

  void adjoint(const std::vector<double>& gy, const std::vector<double>& gx,
               std::vector<double>& out) const {
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t rp = (r + h - 1) % h;
      for (std::size_t c = 0; c < w; ++c) {
        const std::size_t cp = (c + w - 1) % w;
        out[r * w + c] = gy[rp * w + c] - gy[r * w + c] + gx[r * w + cp] - gx[r * w + c];
      }
    }
  }

  double gram_eigenvalue(std::size_t r, std::size_t c) const {
    const double ty = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(h);
    const double tx = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(w);
    return (2.0 - 2.0 * std::cos(ty)) + (2.0 - 2.0 * std::cos(tx));
  }
};

class CircularConvolution {
 public:
  CircularConvolution(const ComplexField& eigenvalues) : eig_(eigenvalues) {}

  void apply(const std::vector<double>& x, std::vector<double>& out, bool adjoint) const {
    ComplexField f(eig_.height(), eig_.width());
    auto fs = f.samples();
    for (std::size_t i = 0; i < fs.size(); ++i) fs[i] = x[i];
    f = fft2(f);
    auto e = eig_.samples();
    fs = f.samples();
    for (std::size_t i = 0; i < fs.size(); ++i) fs[i] *= adjoint ? std::conj(e[i]) : e[i];
    f = ifft2(f);
    fs = f.samples();
    for (std::size_t i = 0; i < fs.size(); ++i) out[i] = fs[i].real();
  }

 private:
  const ComplexField& eig_;
};

}  // namespace

RealImage admm_tv(const RealImage& meas, const optics::Psf& psf, const AdmmParams& params) {
  params.validate();
  if (meas.channels() != psf.channels()) throw InputError("admm_tv: channel mismatch");
  const forward::LsiOperator op(psf, meas.height(), meas.width());
  const std::size_t ph = op.padded_height(), pw = op.padded_width();
  const std::size_t n = ph * pw;
  const CropSpec window = CropSpec::centered(ph, pw, meas.height(), meas.width());
  const CircularGradient psi{ph, pw};

  std::vector<double> crop_gram(n, 0.0);  // diagonal of C^T C
  for (std::size_t r = 0; r < window.out_height; ++r) {
    for (std::size_t c = 0; c < window.out_width; ++c) {
      crop_gram[(r + window.row_offset) * pw + c + window.col_offset] = 1.0;
    }
  }

  RealImage out(meas.height(), meas.width(), meas.channels());
  for (std::size_t ch = 0; ch < meas.channels(); ++ch) {
    // Rescale so the DC gain is psf_gain and the measurement peak is data_peak;
    // the estimate is mapped back at the end.
    ComplexField spectrum = op.spectrum(ch);
    double ymax = 0.0;
    for (std::size_t r = 0; r < meas.height(); ++r) {
      for (std::size_t c = 0; c < meas.width(); ++c) ymax = std::max(ymax, std::abs(meas.at(r, c, ch)));
    }
    const double dc = std::abs(spectrum.samples()[0]);
    double gain = 1.0, data_scale = 1.0;
    if (params.psf_gain > 0.0 && dc > 0.0) gain = params.psf_gain / dc;
    if (params.data_peak > 0.0 && ymax > 0.0) data_scale = params.data_peak / ymax;
    for (auto& v : spectrum.samples()) v *= gain;
    const CircularConvolution conv(spectrum);
    const auto eig = spectrum.samples();

    std::vector<double> padded_meas(n, 0.0);  // C^T y
    for (std::size_t r = 0; r < meas.height(); ++r) {
      for (std::size_t c = 0; c < meas.width(); ++c) {
        padded_meas[(r + window.row_offset) * pw + c + window.col_offset] = data_scale * meas.at(r, c, ch);
      }
    }

    std::vector<double> image(n, 0.0), u_y(n, 0.0), u_x(n, 0.0), x_split(n, 0.0), w_split(n, 0.0);
    std::vector<double> eta_y(n, 0.0), eta_x(n, 0.0), xi(n, 0.0), rho(n, 0.0);
    std::vector<double> gy(n), gx(n), hx(n), rk(n), tmp(n), tmp2(n);
    std::vector<double> x_filter(n);
    AdmmStage cached{0, 0, 0, 0};

    for (std::size_t k = 0; k < params.iterations; ++k) {
      const AdmmStage s = params.stage(k);
      if (s.mu1 != cached.mu1 || s.mu2 != cached.mu2 || s.mu3 != cached.mu3) {
        for (std::size_t r = 0; r < ph; ++r) {
          for (std::size_t c = 0; c < pw; ++c) {
            const std::size_t i = r * pw + c;
            x_filter[i] = 1.0 / (s.mu1 * std::norm(eig[i]) + s.mu2 * psi.gram_eigenvalue(r, c) + s.mu3);
          }
        }
      }
      cached = s;

      // u: TV sparsity
      psi.apply(image, gy, gx);
      for (std::size_t i = 0; i < n; ++i) {
        u_y[i] = soft_threshold(gy[i] + eta_y[i] / s.mu2, s.tau / s.mu2);
        u_x[i] = soft_threshold(gx[i] + eta_x[i] / s.mu2, s.tau / s.mu2);
      }
      // x: sensor crop
      conv.apply(image, hx, false);
      for (std::size_t i = 0; i < n; ++i) {
        x_split[i] = (xi[i] + s.mu1 * hx[i] + padded_meas[i]) / (crop_gram[i] + s.mu1);
      }
      // w: nonnegativity
      for (std::size_t i = 0; i < n; ++i) w_split[i] = std::max(rho[i] / s.mu3 + image[i], 0.0);

      // image: frequency-domain solve of the quadratic subproblem
      for (std::size_t i = 0; i < n; ++i) {
        gy[i] = s.mu2 * u_y[i] - eta_y[i];
        gx[i] = s.mu2 * u_x[i] - eta_x[i];
        tmp[i] = s.mu1 * x_split[i] - xi[i];
      }
      psi.adjoint(gy, gx, rk);
      conv.apply(tmp, tmp2, true);
      for (std::size_t i = 0; i < n; ++i) rk[i] += tmp2[i] + s.mu3 * w_split[i] - rho[i];
      {
        ComplexField f(ph, pw);
        auto fs = f.samples();
        for (std::size_t i = 0; i < n; ++i) fs[i] = rk[i];
        f = fft2(f);
        fs = f.samples();
        for (std::size_t i = 0; i < n; ++i) fs[i] *= x_filter[i];
        f = ifft2(f);
        fs = f.samples();
        for (std::size_t i = 0; i < n; ++i) image[i] = fs[i].real();
      }
      for (double v : image) {
        if (!std::isfinite(v)) {
          throw NumericalError("admm_tv: non-finite iterate at iteration " + std::to_string(k + 1));
        }
      }

      // dual ascent
      psi.apply(image, gy, gx);
      conv.apply(image, hx, false);
      for (std::size_t i = 0; i < n; ++i) {
        eta_y[i] += s.mu2 * (gy[i] - u_y[i]);
        eta_x[i] += s.mu2 * (gx[i] - u_x[i]);
        xi[i] += s.mu1 * (hx[i] - x_split[i]);
        rho[i] += s.mu3 * (image[i] - w_split[i]);
      }
    }

    for (std::size_t r = 0; r < meas.height(); ++r) {
      for (std::size_t c = 0; c < meas.width(); ++c) {
        out.at(r, c, ch) = std::max(0.0, image[(r + window.row_offset) * pw + c + window.col_offset] * gain / data_scale);
      }
    }
  }
  return out;
}

}  // namespace lensless::recover
