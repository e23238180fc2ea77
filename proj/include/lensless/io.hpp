#pragma once

#include <filesystem>
#include <string>

#include "lensless/core.hpp"
#include "lensless/forward.hpp"
#include "lensless/optics.hpp"

namespace lensless::io {

namespace fs = std::filesystem;

/// NPY v1.0, little-endian float32, shape (H, W, C).
void write_npy(const fs::path& path, const RealImage& img);

/// Accepts <f4, <f8, |u1 and <u2 in C order, shape (H, W) or (H, W, C).
/// Integer data is returned as raw counts.
RealImage read_npy(const fs::path& path);

/// 8- or 16-bit grayscale/RGB(A) PNG scaled to [0, 1]; alpha is dropped,
/// palettes are expanded.
RealImage read_png(const fs::path& path);

/// 16-bit PNG with value v stored as round(65535 * v / peak), clipped.
void write_png16(const fs::path& path, const RealImage& img, double peak = 1.0);

/// Dispatches on the extension (.npy or .png).
RealImage read_image(const fs::path& path);

/// Sidecar of `path`: same stem, ".json" extension.
fs::path sidecar_path(const fs::path& path);

/// PSF as NPY plus a JSON sidecar (wavelengths, pitch, geometry, variant,
/// normalization).
void write_psf(const fs::path& path, const optics::Psf& psf);

/// Reads the image and, if present, its sidecar; a bare image (NPY or PNG)
/// becomes a raw PSF, unit_sum-normalized when `normalize` is set.
optics::Psf read_psf(const fs::path& path, bool normalize = true);

std::string noise_to_json(const forward::NoiseSpec& spec);
forward::NoiseSpec noise_from_json(const std::string& text);

std::string mask_to_json(const optics::MaskPattern& mask);
optics::MaskPattern mask_from_json(const std::string& text);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace lensless::io
