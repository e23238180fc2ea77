#include <cmath>
#include <random>

#include "lensless/forward.hpp"

namespace lensless::forward {

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::shot_poisson ? "shot_poisson" : "gaussian";
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "shot_poisson" || s == "poisson" || s == "shot") return NoiseKind::shot_poisson;
  if (s == "gaussian") return NoiseKind::gaussian;
  throw InputError("unknown noise kind '" + s + "'");
}

RealImage add_shot_noise(const RealImage& meas, const NoiseSpec& spec) {
  if (std::isnan(spec.snr_db) || spec.snr_db == -std::numeric_limits<double>::infinity()) {
    throw InputError("add_shot_noise: snr_db must be finite or +inf");
  }
  for (double v : meas.samples()) {
    if (!(v >= 0.0)) throw InputError("add_shot_noise: negative or non-finite input sample");
  }
  if (spec.disabled()) return meas;
  const double total = meas.sum();
  const double energy = meas.energy();
  if (total == 0.0) return meas;
  // Var(Poisson(k y) / k) = y / k, so E|n|^2 = total / k; solve the SNR for k.
  const double photons_per_unit = std::pow(10.0, spec.snr_db / 10.0) * total / energy;
  std::mt19937_64 rng(spec.seed);
  RealImage out(meas.height(), meas.width(), meas.channels());
  auto src = meas.samples();
  auto dst = out.samples();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double mean = photons_per_unit * src[i];
    if (mean == 0.0) continue;
    std::poisson_distribution<long long> draw(mean);
    dst[i] = static_cast<double>(draw(rng)) / photons_per_unit;
  }
  return out;
}

RealImage add_gaussian_noise(const RealImage& arr, const NoiseSpec& spec) {
  if (std::isnan(spec.snr_db) || spec.snr_db == -std::numeric_limits<double>::infinity()) {
    throw InputError("add_gaussian_noise: snr_db must be finite or +inf");
  }
  for (double v : arr.samples()) {
    if (!std::isfinite(v)) throw InputError("add_gaussian_noise: non-finite input sample");
  }
  if (spec.disabled()) return arr;
  const double energy = arr.energy();
  if (energy == 0.0) throw InputError("add_gaussian_noise: zero input has no SNR scale");
  const double sigma =
      std::sqrt(energy / (static_cast<double>(arr.size()) * std::pow(10.0, spec.snr_db / 10.0)));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> draw(0.0, sigma);
  RealImage out = arr;
  out.signed_intermediate = true;
  for (auto& v : out.samples()) v += draw(rng);
  return out;
}

RealImage add_noise(const RealImage& img, const NoiseSpec& spec) {
  return spec.kind == NoiseKind::shot_poisson ? add_shot_noise(img, spec)
                                              : add_gaussian_noise(img, spec);
}

}  // namespace lensless::forward
