#include "doctest.h"
#include "helpers.hpp"

#include "json.hpp"

#include "lensless/forward.hpp"
#include "lensless/metrics.hpp"

using namespace lensless;
using namespace lensless::metrics;

namespace {

// Windowed SSIM evaluated window by window with explicit 2-D weights.
double brute_ssim(const RealImage& a, const RealImage& b, double peak) {
  double g[11];
  double total = 0.0;
  for (int i = 0; i < 11; ++i) total += g[i] = std::exp(-0.5 * (i - 5) * (i - 5) / (1.5 * 1.5));
  for (double& v : g) v /= total;
  const double c1 = std::pow(0.01 * peak, 2), c2 = std::pow(0.03 * peak, 2);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t ch = 0; ch < a.channels(); ++ch) {
    for (std::size_t r = 0; r + 11 <= a.height(); ++r) {
      for (std::size_t c = 0; c + 11 <= a.width(); ++c) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = g[i] * g[j], x = a.at(r + i, c + j, ch), y = b.at(r + i, c + j, ch);
            ma += w * x, mb += w * y, saa += w * x * x, sbb += w * y * y, sab += w * x * y;
          }
        const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
        sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return sum / static_cast<double>(count);
}

RealImage checkerboard(std::size_t n, bool invert) {
  RealImage img(n, n, 1);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) img.at(r, c) = ((r / 2 + c / 2) % 2 == 0) != invert ? 1.0 : 0.0;
  return img;
}

}  // namespace

TEST_CASE("psnr") {
  const auto a = testutil::random_image(1, 16, 16, 3);
  CHECK(std::isinf(psnr(a, a, 1.0)));
  RealImage b = a;
  for (auto& v : b.samples()) v += 0.1;
  CHECK(psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(psnr(a, b, 1.0) == psnr(b, a, 1.0));
  CHECK(psnr(a, b, 2.0) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)));
  CHECK_THROWS_AS(psnr(a, RealImage(16, 16, 1), 1.0), InputError);
  CHECK_THROWS_AS(psnr(a, b, 0.0), InputError);
}

TEST_CASE("psnr decreases as noise grows") {
  const auto a = testutil::random_image(2, 32, 32, 1);
  double last = std::numeric_limits<double>::infinity();
  for (double snr : {30.0, 20.0, 10.0, 5.0, 0.0}) {
    const auto noisy = forward::add_gaussian_noise(a, {forward::NoiseKind::gaussian, snr, 9});
    const double p = psnr(a, noisy, 1.0);
    CHECK(p < last);
    last = p;
  }
}

TEST_CASE("ssim basics") {
  const auto a = testutil::random_image(3, 20, 24, 2);
  CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);
  const auto b = testutil::random_image(4, 20, 24, 2);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-12);
  CHECK(ssim(checkerboard(16, false), checkerboard(16, true)) < 0.0);
  CHECK_THROWS_AS(ssim(RealImage(10, 20, 1), RealImage(10, 20, 1)), InputError);
  CHECK_THROWS_AS(ssim(a, RealImage(20, 24, 1)), InputError);
}

TEST_CASE("ssim matches the windowed oracle") {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto a = testutil::random_image(10 + s, 14 + s, 13, 2);
    auto b = a;
    const auto n = testutil::random_image(20 + s, 14 + s, 13, 2, -0.2, 0.2);
    for (std::size_t i = 0; i < b.size(); ++i) b.samples()[i] += n.samples()[i];
    b.signed_intermediate = true;
    CHECK(std::abs(ssim(a, b, 1.0) - brute_ssim(a, b, 1.0)) < 1e-12);
    CHECK(std::abs(ssim(a, b, 255.0) - brute_ssim(a, b, 255.0)) < 1e-12);
  }
}

TEST_CASE("ssim is invariant to a joint rescale of images and peak") {
  const auto a = testutil::random_image(5, 16, 16, 1), b = testutil::random_image(6, 16, 16, 1);
  RealImage a2 = a, b2 = b;
  for (auto& v : a2.samples()) v *= 255.0;
  for (auto& v : b2.samples()) v *= 255.0;
  CHECK(std::abs(ssim(a, b, 1.0) - ssim(a2, b2, 255.0)) < 1e-9);
  // a common offset leaves identical pairs at exactly 1
  RealImage c = a;
  for (auto& v : c.samples()) v += 3.0;
  CHECK(std::abs(ssim(c, c, 1.0) - 1.0) < 1e-12);
}

TEST_CASE("data_fidelity") {
  const auto scene = testutil::random_image(7, 12, 12, 1);
  const auto psf = optics::Psf::from_image(testutil::random_image(8, 5, 5, 1), optics::Normalization::unit_sum);
  const auto meas = forward::convolve_lsi(scene, psf);
  CHECK(data_fidelity(meas, scene, psf) < 1e-12);
  CHECK(data_fidelity(meas, RealImage(12, 12, 1), psf) == doctest::Approx(meas.energy() / 144.0).epsilon(1e-14));

  // quadratic in the scale with its minimum at 1
  std::vector<double> f;
  for (double l : {0.0, 0.5, 1.0, 1.5, 2.0}) {
    RealImage x = scene;
    for (auto& v : x.samples()) v *= l;
    f.push_back(data_fidelity(meas, x, psf));
  }
  for (double v : f) CHECK(v >= 0.0);
  CHECK(f[2] < f[1]);
  CHECK(f[2] < f[3]);
  CHECK(f[0] - 2 * f[1] + f[2] == doctest::Approx(f[2] - 2 * f[3] + f[4]).epsilon(1e-9));
  CHECK(f[0] == doctest::Approx(f[4]).epsilon(1e-9));
  CHECK_THROWS_AS(data_fidelity(meas, RealImage(12, 11, 1), psf), InputError);
}

TEST_CASE("empirical_snr") {
  const auto clean = testutil::random_image(9, 32, 32, 1);
  const auto noise = testutil::random_image(10, 32, 32, 1, -1.0, 1.0);
  const double scale = std::sqrt(clean.energy() / noise.energy());
  RealImage noisy = clean, quieter = clean;
  noisy.signed_intermediate = quieter.signed_intermediate = true;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    noisy.samples()[i] += scale * noise.samples()[i];
    quieter.samples()[i] += scale / std::sqrt(10.0) * noise.samples()[i];
  }
  CHECK(empirical_snr(clean, noisy) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(empirical_snr(clean, quieter) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(std::isinf(empirical_snr(clean, clean)));
}

TEST_CASE("roi_extract") {
  const auto img = testutil::random_image(11, 10, 12, 3);
  CHECK(roi_extract(img, RoiSpec::full(10, 12)) == img);

  const RealImage flat(16, 16, 1, 0.3);
  const auto half = roi_extract(flat, {0, 0, 16, 16, 8, 8});
  CHECK(half.height() == 8);
  for (double v : half.samples()) CHECK(v == doctest::Approx(0.3));

  RealImage ramp(6, 12, 1);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 12; ++c) ramp.at(r, c) = static_cast<double>(c) + 10.0 * static_cast<double>(r);
  // cols 2..9 halved: sample d sits at source position 2 d + 0.5
  const auto down = roi_extract(ramp, {1, 2, 4, 8, 4, 4});
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t d = 0; d < 4; ++d)
      CHECK(std::abs(down.at(r, d) - (2.0 + 2.0 * d + 0.5 + 10.0 * (1.0 + r))) < 1e-6);
  // doubled: interior samples at 0.5 d - 0.25, clamped at the edges
  const auto up = roi_extract(ramp, {0, 0, 6, 4, 6, 8});
  CHECK(std::abs(up.at(0, 0) - 0.0) < 1e-6);
  CHECK(std::abs(up.at(0, 3) - 1.25) < 1e-6);
  CHECK(std::abs(up.at(0, 7) - 3.0) < 1e-6);

  CHECK_THROWS_AS(roi_extract(img, {5, 0, 6, 12, 6, 12}), InputError);
  CHECK_THROWS_AS(roi_extract(img, {0, 0, 10, 12, 0, 12}), InputError);
}

TEST_CASE("MetricsReport aggregation and serialization") {
  MetricsReport rep;
  rep.rows = {{"b", 20.0, 0.5, 0.1, "m1", "s", 2.0, ""},
              {"a", 30.0, 0.7, 0.3, "m1", "s", 4.0, ""},
              {"c", 0.0, 0.0, 0.0, "m1", "s", std::nullopt, "diverged, at 3"},
              {"a", std::numeric_limits<double>::infinity(), 1.0, 0.0, "m0", "s", std::nullopt, ""}};
  rep.fingerprint["peak"] = "ground_truth_max";
  rep.finalize();
  CHECK(rep.rows[0].method == "m0");
  CHECK(rep.rows[1].id == "a");
  CHECK(rep.rows[2].id == "b");
  REQUIRE(rep.aggregates.size() == 2);
  const auto& m1 = rep.aggregates[1];
  CHECK(m1.count == 2);
  CHECK(m1.failures == 1);
  CHECK(m1.mean_psnr_db == 25.0);
  CHECK(m1.mean_ssim == doctest::Approx(0.6));
  CHECK(m1.std_psnr_db == doctest::Approx(std::sqrt(50.0)));
  CHECK(m1.mean_inference_ms == 3.0);
  CHECK(!rep.aggregates[0].mean_inference_ms);

  const auto csv = rep.to_csv();
  CHECK(csv.rfind("id,psnr_db,ssim,lpips,data_fidelity,method,stratum,inference_ms,error\n", 0) == 0);
  CHECK(csv.find("a,inf,1,,0,m0,s,,\n") != std::string::npos);
  CHECK(csv.find("c,,,,,m1,s,,diverged; at 3\n") != std::string::npos);

  const auto doc = nlohmann::json::parse(rep.to_json());
  CHECK(doc["rows"][0]["psnr_db"] == "inf");
  CHECK(doc["rows"][0]["lpips"].is_null());
  CHECK(doc["rows"][1]["psnr_db"] == 30.0);
  CHECK(doc["rows"][3]["error"] == "diverged, at 3");
  CHECK(doc["aggregates"][1]["count"] == 2);
  CHECK(doc["fingerprint"]["peak"] == "ground_truth_max");

  // row order does not depend on insertion order
  MetricsReport shuffled = rep;
  std::reverse(shuffled.rows.begin(), shuffled.rows.end());
  shuffled.finalize();
  CHECK(shuffled.to_csv() == csv);
}
