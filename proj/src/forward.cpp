#include "lensless/forward.hpp"

#include <cmath>
#include <string>

namespace lensless::forward {

LsiOperator::LsiOperator(const optics::Psf& psf, std::size_t scene_height,
                         std::size_t scene_width)
    : height_(scene_height), width_(scene_width) {
  psf.validate();
  const RealImage& k = psf.image;
  if (scene_height == 0 || scene_width == 0 || k.empty()) {
    throw InputError("LsiOperator: empty scene or PSF");
  }
  padded_h_ = next_fast_len(scene_height + k.height() - 1);
  padded_w_ = next_fast_len(scene_width + k.width() - 1);
  const std::size_t cy = k.height() / 2;
  const std::size_t cx = k.width() / 2;
  const double scale = std::sqrt(static_cast<double>(padded_h_ * padded_w_));
  for (std::size_t ch = 0; ch < k.channels(); ++ch) {
    ComplexField kernel(padded_h_, padded_w_);
    for (std::size_t r = 0; r < k.height(); ++r) {
      for (std::size_t c = 0; c < k.width(); ++c) {
        kernel.at((r + padded_h_ - cy) % padded_h_, (c + padded_w_ - cx) % padded_w_) =
            k.at(r, c, ch);
      }
    }
    ComplexField spec = fft2(kernel);
    for (auto& v : spec.samples()) v *= scale;
    spectra_.push_back(std::move(spec));
  }
}

ComplexField LsiOperator::embed(const RealImage& plane) const {
  ComplexField out(padded_h_, padded_w_);
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) out.at(r, c) = plane.at(r, c);
  }
  return out;
}

RealImage LsiOperator::extract(const ComplexField& padded) const {
  RealImage out(height_, width_, 1);
  out.signed_intermediate = true;
  for (std::size_t r = 0; r < height_; ++r) {
    for (std::size_t c = 0; c < width_; ++c) out.at(r, c) = padded.at(r, c).real();
  }
  return out;
}

RealImage LsiOperator::filter(const RealImage& img, bool conjugate) const {
  if (img.height() != height_ || img.width() != width_ || img.channels() != channels()) {
    throw InputError("LsiOperator: image shape does not match the operator");
  }
  RealImage out(height_, width_, channels());
  out.signed_intermediate = true;
  for (std::size_t ch = 0; ch < channels(); ++ch) {
    ComplexField spec = fft2(embed(img.channel(ch)));
    const auto eig = spectra_[ch].samples();
    auto s = spec.samples();
    for (std::size_t i = 0; i < s.size(); ++i) s[i] *= conjugate ? std::conj(eig[i]) : eig[i];
    out.set_channel(ch, extract(ifft2(spec)));
  }
  return out;
}

RealImage LsiOperator::apply(const RealImage& x) const { return filter(x, false); }

RealImage LsiOperator::adjoint(const RealImage& y) const { return filter(y, true); }

RealImage convolve_lsi(const RealImage& scene, const optics::Psf& psf, ConvolveAudit* audit) {
  if (scene.channels() != psf.channels()) {
    throw InputError("convolve_lsi: scene has " + std::to_string(scene.channels()) +
                     " channels, PSF has " + std::to_string(psf.channels()));
  }
  scene.validate();
  LsiOperator op(psf, scene.height(), scene.width());
  RealImage out = op.apply(scene);
  const double tol = 1e-9 * std::max(1.0, out.max());
  std::size_t clipped = 0;
  for (auto& v : out.samples()) {
    if (v < -tol) ++clipped;
    if (v < 0.0) v = 0.0;
  }
  out.signed_intermediate = false;
  if (audit != nullptr) audit->clipped_beyond_tolerance = clipped;
  return out;
}

void DenseSystem::validate() const {
  if (!H.allFinite()) throw InputError("DenseSystem: non-finite entries in H");
  if (delta && (delta->rows() != H.rows() || delta->cols() != H.cols() || !delta->allFinite())) {
    throw InputError("DenseSystem: delta must match H and be finite");
  }
  if (crop && (crop->cols() != H.rows() || !crop->allFinite())) {
    throw InputError("DenseSystem: crop columns must equal H rows");
  }
}

DenseSystem lsi_to_dense(const optics::Psf& psf, std::size_t scene_height,
                         std::size_t scene_width) {
  if (scene_height > kDenseSceneLimit || scene_width > kDenseSceneLimit) {
    throw InputError("lsi_to_dense: scene larger than the 16x16 oracle guard");
  }
  psf.validate();
  const RealImage& k = psf.image;
  const std::size_t nc = k.channels();
  const auto cy = static_cast<std::ptrdiff_t>(k.height() / 2);
  const auto cx = static_cast<std::ptrdiff_t>(k.width() / 2);
  const auto n = static_cast<Eigen::Index>(scene_height * scene_width * nc);
  DenseSystem sys;
  sys.H = Eigen::MatrixXd::Zero(n, n);
  auto index = [&](std::size_t r, std::size_t c, std::size_t ch) {
    return static_cast<Eigen::Index>((r * scene_width + c) * nc + ch);
  };
  for (std::size_t a = 0; a < scene_height; ++a) {
    for (std::size_t b = 0; b < scene_width; ++b) {
      for (std::size_t r = 0; r < scene_height; ++r) {
        const auto kr = static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(a) + cy;
        if (kr < 0 || kr >= static_cast<std::ptrdiff_t>(k.height())) continue;
        for (std::size_t c = 0; c < scene_width; ++c) {
          const auto kc = static_cast<std::ptrdiff_t>(c) - static_cast<std::ptrdiff_t>(b) + cx;
          if (kc < 0 || kc >= static_cast<std::ptrdiff_t>(k.width())) continue;
          for (std::size_t ch = 0; ch < nc; ++ch) {
            sys.H(index(r, c, ch), index(a, b, ch)) = k.at(kr, kc, ch);
          }
        }
      }
    }
  }
  return sys;
}

Eigen::MatrixXd selection_matrix(const CropSpec& spec, std::size_t src_height,
                                 std::size_t src_width, std::size_t channels) {
  if (!spec.fits(src_height, src_width)) throw InputError("selection_matrix: window out of bounds");
  const auto rows = static_cast<Eigen::Index>(spec.out_height * spec.out_width * channels);
  const auto cols = static_cast<Eigen::Index>(src_height * src_width * channels);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(rows, cols);
  for (std::size_t r = 0; r < spec.out_height; ++r) {
    for (std::size_t c = 0; c < spec.out_width; ++c) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const auto out = (r * spec.out_width + c) * channels + ch;
        const auto src =
            ((r + spec.row_offset) * src_width + (c + spec.col_offset)) * channels + ch;
        C(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(src)) = 1.0;
      }
    }
  }
  return C;
}

Eigen::VectorXd dense_forward(const DenseSystem& sys, const Eigen::VectorXd& x,
                              const std::optional<Eigen::VectorXd>& noise) {
  sys.validate();
  if (x.size() != sys.H.cols()) throw InputError("dense_forward: x has the wrong length");
  Eigen::VectorXd y = sys.H * x;
  if (sys.delta) y += *sys.delta * x;
  if (sys.crop) y = *sys.crop * y;
  if (noise) {
    if (noise->size() != y.size()) throw InputError("dense_forward: noise has the wrong length");
    y += *noise;
  }
  return y;
}

Eigen::VectorXd to_vector(const RealImage& img) {
  return Eigen::Map<const Eigen::VectorXd>(img.samples().data(),
                                           static_cast<Eigen::Index>(img.size()));
}

RealImage from_vector(const Eigen::VectorXd& v, std::size_t height, std::size_t width,
                      std::size_t channels) {
  RealImage out(height, width, channels, std::vector<double>(v.data(), v.data() + v.size()));
  out.signed_intermediate = true;
  return out;
}

}  // namespace lensless::forward
