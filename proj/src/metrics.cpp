#include "lensless/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "lensless/forward.hpp"

namespace lensless::metrics {

namespace {

void require_same_shape(const RealImage& a, const RealImage& b, const char* who) {
  if (!a.same_shape(b)) throw InputError(std::string(who) + ": images differ in shape");
}

double squared_error(const RealImage& a, const RealImage& b) {
  double s = 0.0;
  auto x = a.samples();
  auto y = b.samples();
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s;
}

// Shortest round-trip representation, so reports are byte-stable.
std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double psnr(const RealImage& a, const RealImage& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (!(peak > 0.0)) throw InputError("psnr: peak must be > 0");
  const double mse = squared_error(a, b) / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const RealImage& a, const RealImage& b, double peak) {
  require_same_shape(a, b, "ssim");
  constexpr std::size_t kWin = 11;
  constexpr double kSigma = 1.5;
  if (a.height() < kWin || a.width() < kWin) throw InputError("ssim: image smaller than 11x11 window");
  std::array<double, kWin> taps{};
  double total = 0.0;
  for (std::size_t i = 0; i < kWin; ++i) {
    const double d = static_cast<double>(i) - 5.0;
    taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t h = a.height(), w = a.width();
  const std::size_t oh = h - kWin + 1, ow = w - kWin + 1;

  // Valid-mode separable filtering of the five moment images.
  auto filter = [&](const std::vector<double>& src) {
    std::vector<double> rows(h * ow), out(oh * ow);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < kWin; ++k) acc += taps[k] * src[r * w + c + k];
        rows[r * ow + c] = acc;
      }
    }
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < kWin; ++k) acc += taps[k] * rows[(r + k) * ow + c];
        out[r * ow + c] = acc;
      }
    }
    return out;
  };

  double sum = 0.0;
  for (std::size_t ch = 0; ch < a.channels(); ++ch) {
    std::vector<double> x(h * w), y(h * w), xx(h * w), yy(h * w), xy(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      x[i] = a.samples()[i * a.channels() + ch];
      y[i] = b.samples()[i * b.channels() + ch];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x), my = filter(y), mxx = filter(xx), myy = filter(yy), mxy = filter(xy);
    for (std::size_t i = 0; i < oh * ow; ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
  }
  return sum / static_cast<double>(oh * ow * a.channels());
}

double data_fidelity(const RealImage& meas, const RealImage& est, const optics::Psf& psf) {
  require_same_shape(meas, est, "data_fidelity");
  if (meas.channels() != psf.channels()) throw InputError("data_fidelity: PSF channel mismatch");
  const forward::LsiOperator op(psf, meas.height(), meas.width());
  return squared_error(op.apply(est), meas) / static_cast<double>(meas.pixel_count());
}

double empirical_snr(const RealImage& clean, const RealImage& noisy) {
  require_same_shape(clean, noisy, "empirical_snr");
  const double noise = squared_error(clean, noisy);
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(clean.energy() / noise);
}

RoiSpec RoiSpec::full(std::size_t height, std::size_t width) {
  return {0, 0, height, width, height, width};
}

void RoiSpec::validate(std::size_t src_height, std::size_t src_width) const {
  const CropSpec window{row_offset, col_offset, height, width};
  if (!window.fits(src_height, src_width)) throw InputError("RoiSpec: window outside the reconstruction");
  if (target_height == 0 || target_width == 0) throw InputError("RoiSpec: target dims must be >= 1");
}

RealImage resize_bilinear(const RealImage& img, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || img.empty()) throw InputError("resize_bilinear: empty shape");
  if (height == img.height() && width == img.width()) return img;
  RealImage out(height, width, img.channels());
  out.signed_intermediate = img.signed_intermediate;
  const double sy = static_cast<double>(img.height()) / static_cast<double>(height);
  const double sx = static_cast<double>(img.width()) / static_cast<double>(width);
  auto source = [](std::size_t dst, double scale, std::size_t n) {
    const double pos = std::clamp((static_cast<double>(dst) + 0.5) * scale - 0.5, 0.0,
                                  static_cast<double>(n - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(pos));
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    return std::tuple{i0, i1, pos - static_cast<double>(i0)};
  };
  for (std::size_t r = 0; r < height; ++r) {
    const auto [r0, r1, fy] = source(r, sy, img.height());
    for (std::size_t c = 0; c < width; ++c) {
      const auto [c0, c1, fx] = source(c, sx, img.width());
      for (std::size_t ch = 0; ch < img.channels(); ++ch) {
        const double top = (1.0 - fx) * img.at(r0, c0, ch) + fx * img.at(r0, c1, ch);
        const double bottom = (1.0 - fx) * img.at(r1, c0, ch) + fx * img.at(r1, c1, ch);
        out.at(r, c, ch) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

RealImage roi_extract(const RealImage& recon, const RoiSpec& spec) {
  spec.validate(recon.height(), recon.width());
  const RealImage window = crop(recon, CropSpec{spec.row_offset, spec.col_offset, spec.height, spec.width});
  return resize_bilinear(window, spec.target_height, spec.target_width);
}

void MetricsReport::finalize() {
  std::stable_sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    return std::tie(a.method, a.stratum, a.id) < std::tie(b.method, b.stratum, b.id);
  });
  aggregates.clear();
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    Aggregate agg;
    agg.method = rows[i].method;
    agg.stratum = rows[i].stratum;
    double timing = 0.0;
    bool timed = true;
    std::vector<double> psnrs;
    while (j < rows.size() && rows[j].method == agg.method && rows[j].stratum == agg.stratum) {
      const auto& row = rows[j++];
      if (!row.error.empty()) {
        ++agg.failures;
        continue;
      }
      ++agg.count;
      psnrs.push_back(row.psnr_db);
      agg.mean_ssim += row.ssim;
      agg.mean_data_fidelity += row.data_fidelity;
      if (row.inference_ms) timing += *row.inference_ms;
      else timed = false;
    }
    if (agg.count > 0) {
      const double n = static_cast<double>(agg.count);
      for (double p : psnrs) agg.mean_psnr_db += p;
      agg.mean_psnr_db /= n;
      agg.mean_ssim /= n;
      agg.mean_data_fidelity /= n;
      double var = 0.0;
      for (double p : psnrs) var += (p - agg.mean_psnr_db) * (p - agg.mean_psnr_db);
      agg.std_psnr_db = agg.count > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
      if (timed) agg.mean_inference_ms = timing / n;
    }
    aggregates.push_back(agg);
    i = j;
  }
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "id,psnr_db,ssim,lpips,data_fidelity,method,stratum,inference_ms,error\n";
  for (const auto& r : rows) {
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << r.id << ',' << (r.error.empty() ? format_number(r.psnr_db) : "") << ','
        << (r.error.empty() ? format_number(r.ssim) : "") << ",,"
        << (r.error.empty() ? format_number(r.data_fidelity) : "") << ',' << r.method << ','
        << r.stratum << ',' << (r.inference_ms ? format_number(*r.inference_ms) : "") << ','
        << error << '\n';
  }
  return out.str();
}

std::string MetricsReport::to_json() const {
  using nlohmann::ordered_json;
  // psnr may be +inf (identical images); JSON has no infinity, so it is a string.
  auto number = [](double v) -> ordered_json {
    if (std::isfinite(v)) return v;
    return format_number(v);
  };
  ordered_json doc;
  doc["fingerprint"] = ordered_json::object();
  for (const auto& [k, v] : fingerprint) doc["fingerprint"][k] = v;
  doc["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json row;
    row["id"] = r.id;
    row["psnr_db"] = r.error.empty() ? number(r.psnr_db) : ordered_json(nullptr);
    row["ssim"] = r.error.empty() ? number(r.ssim) : ordered_json(nullptr);
    row["lpips"] = nullptr;
    row["data_fidelity"] = r.error.empty() ? number(r.data_fidelity) : ordered_json(nullptr);
    row["method"] = r.method;
    row["stratum"] = r.stratum;
    row["inference_ms"] = r.inference_ms ? ordered_json(*r.inference_ms) : ordered_json(nullptr);
    row["error"] = r.error.empty() ? ordered_json(nullptr) : ordered_json(r.error);
    doc["rows"].push_back(row);
  }
  doc["aggregates"] = ordered_json::array();
  for (const auto& a : aggregates) {
    ordered_json agg;
    agg["method"] = a.method;
    agg["stratum"] = a.stratum;
    agg["count"] = a.count;
    agg["failures"] = a.failures;
    agg["mean_psnr_db"] = number(a.mean_psnr_db);
    agg["std_psnr_db"] = number(a.std_psnr_db);
    agg["mean_ssim"] = number(a.mean_ssim);
    agg["mean_lpips"] = nullptr;
    agg["mean_data_fidelity"] = number(a.mean_data_fidelity);
    agg["mean_inference_ms"] = a.mean_inference_ms ? ordered_json(*a.mean_inference_ms) : ordered_json(nullptr);
    doc["aggregates"].push_back(agg);
  }
  return doc.dump(2) + "\n";
}

}  // namespace lensless::metrics
