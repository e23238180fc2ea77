#include "lensless/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>

#include <png.h>

#include "json.hpp"
#include "lensless/error.hpp"

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace lensless::io {

using nlohmann::ordered_json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw Error("failed to write " + path.string());
}

// -- NPY ---------------------------------------------------------------------

void write_npy(const fs::path& path, const RealImage& img) {
  img.validate();
  std::string header = "{'descr': '<f4', 'fortran_order': False, 'shape': (" +
                       std::to_string(img.height()) + ", " + std::to_string(img.width()) + ", " +
                       std::to_string(img.channels()) + "), }";
  const std::size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<float> data(img.size());
  std::transform(img.samples().begin(), img.samples().end(), data.begin(),
                 [](double v) { return static_cast<float>(v); });

  std::ofstream out(path, std::ios::binary);
  const auto len = static_cast<std::uint16_t>(header.size());
  out.write("\x93NUMPY\x01\x00", 8);
  out.put(static_cast<char>(len & 0xff));
  out.put(static_cast<char>(len >> 8));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  out.close();
  if (!out) throw Error("failed to write " + path.string());
}

RealImage read_npy(const fs::path& path) {
  const std::string bytes = read_text(path);
  const std::string where = "read_npy " + path.string() + ": ";
  if (bytes.size() < 10 || bytes.compare(0, 6, "\x93NUMPY") != 0) throw InputError(where + "not an NPY file");
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0, offset = 0;
  if (major == 1) {
    header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw InputError(where + "truncated header");
    for (int i = 0; i < 4; ++i) header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
    offset = 12;
  } else {
    throw InputError(where + "unsupported NPY version");
  }
  if (bytes.size() < offset + header_len) throw InputError(where + "truncated header");
  const std::string header = bytes.substr(offset, header_len);

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']+)')"))) throw InputError(where + "no descr");
  const std::string descr = m[1];
  if (!std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*(True|False))"))) {
    throw InputError(where + "no fortran_order");
  }
  if (m[1] == "True") throw InputError(where + "Fortran-ordered arrays are not supported");
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) throw InputError(where + "no shape");
  std::vector<std::size_t> shape;
  {
    const std::string dims = m[1];
    const std::regex num(R"(\d+)");
    for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator(); ++it) {
      shape.push_back(std::stoull(it->str()));
    }
  }
  if (shape.size() != 2 && shape.size() != 3) throw InputError(where + "expected a 2-D or 3-D array");
  const std::size_t h = shape[0], w = shape[1], c = shape.size() == 3 ? shape[2] : 1;
  const std::size_t count = h * w * c;

  std::size_t item = 0;
  if (descr == "<f4") item = 4;
  else if (descr == "<f8") item = 8;
  else if (descr == "|u1" || descr == "<u1") item = 1;
  else if (descr == "<u2") item = 2;
  else throw InputError(where + "unsupported dtype " + descr);

  const std::size_t data_offset = offset + header_len;
  if (bytes.size() < data_offset + count * item) throw InputError(where + "truncated data");
  std::vector<double> values(count);
  const char* p = bytes.data() + data_offset;
  for (std::size_t i = 0; i < count; ++i) {
    switch (item) {
      case 4: { float f; std::memcpy(&f, p + 4 * i, 4); values[i] = f; break; }
      case 8: { double d; std::memcpy(&d, p + 8 * i, 8); values[i] = d; break; }
      case 1: values[i] = static_cast<unsigned char>(p[i]); break;
      default: { std::uint16_t u; std::memcpy(&u, p + 2 * i, 2); values[i] = u; break; }
    }
  }
  RealImage img(h, w, c, std::move(values));
  try {
    img.validate();
  } catch (const InputError& e) {
    throw InputError(where + e.what());
  }
  return img;
}

// -- PNG ---------------------------------------------------------------------

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg;
  png_longjmp(png, 1);
}

void png_warn(png_structp, png_const_charp) {}

// Decodes into `rows`; returns false with `error` set on a libpng failure.
bool decode_png(std::FILE* fp, std::vector<std::uint8_t>& pixels, png_uint_32& w, png_uint_32& h,
                int& channels, int& depth, std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> row_ptrs;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (error.empty()) error = "libpng failure";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  if (png_get_bit_depth(png, info) == 16) png_set_swap(png);
  png_read_update_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels.assign(stride * h, 0);
  row_ptrs.resize(h);
  for (png_uint_32 r = 0; r < h; ++r) row_ptrs[r] = pixels.data() + r * stride;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool encode_png16(std::FILE* fp, const std::vector<std::uint8_t>& pixels, png_uint_32 w, png_uint_32 h,
                  int channels, std::string& error) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> row_ptrs(h);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    if (error.empty()) error = "libpng failure";
    return false;
  }
  png_init_io(png, fp);
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, w, h, 16, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(w) * static_cast<std::size_t>(channels) * 2;
  for (png_uint_32 r = 0; r < h; ++r) row_ptrs[r] = const_cast<png_bytep>(pixels.data() + r * stride);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

RealImage read_png(const fs::path& path) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw InputError("cannot open " + path.string());
  std::uint8_t sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError("read_png " + path.string() + ": not a PNG file");
  }
  std::rewind(fp.get());
  std::vector<std::uint8_t> pixels;
  png_uint_32 w = 0, h = 0;
  int channels = 0, depth = 0;
  std::string error;
  if (!decode_png(fp.get(), pixels, w, h, channels, depth, error)) {
    throw InputError("read_png " + path.string() + ": " + error);
  }
  RealImage img(h, w, static_cast<std::size_t>(channels));
  auto s = img.samples();
  if (depth == 16) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      std::uint16_t v;
      std::memcpy(&v, pixels.data() + 2 * i, 2);
      s[i] = v / 65535.0;
    }
  } else {
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = pixels[i] / 255.0;
  }
  return img;
}

void write_png16(const fs::path& path, const RealImage& img, double peak) {
  img.validate();
  if (!(peak > 0.0)) throw InputError("write_png16: peak must be > 0");
  if (img.channels() != 1 && img.channels() != 3) throw InputError("write_png16: need 1 or 3 channels");
  std::vector<std::uint8_t> pixels(img.size() * 2);
  auto s = img.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double q = std::clamp(std::round(65535.0 * s[i] / peak), 0.0, 65535.0);
    const auto v = static_cast<std::uint16_t>(q);
    pixels[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG is big-endian
    pixels[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw Error("cannot create " + path.string());
  std::string error;
  if (!encode_png16(fp.get(), pixels, static_cast<png_uint_32>(img.width()),
                    static_cast<png_uint_32>(img.height()), static_cast<int>(img.channels()), error)) {
    throw Error("write_png16 " + path.string() + ": " + error);
  }
}

RealImage read_image(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".npy") return read_npy(path);
  if (ext == ".png") return read_png(path);
  throw InputError("unsupported image format: " + path.string());
}

// -- sidecars ----------------------------------------------------------------

fs::path sidecar_path(const fs::path& path) {
  fs::path out = path;
  out.replace_extension(".json");
  return out;
}

void write_psf(const fs::path& path, const optics::Psf& psf) {
  psf.validate();
  write_npy(path, psf.image);
  const auto& g = psf.geometry;
  ordered_json doc;
  doc["wavelengths"] = psf.wavelengths;
  doc["variant"] = optics::to_string(psf.variant);
  doc["normalization"] = optics::to_string(psf.normalization);
  doc["geometry"] = {{"d1", g.d1},
                     {"d2", g.d2},
                     {"sim_height", g.sim_height},
                     {"sim_width", g.sim_width},
                     {"sim_pitch", g.sim_pitch},
                     {"oversample", g.oversample},
                     {"sensor_pitch", g.sim_pitch * static_cast<double>(g.oversample)},
                     {"sensor_crop",
                      {{"row_offset", g.sensor_crop.row_offset},
                       {"col_offset", g.sensor_crop.col_offset},
                       {"height", g.sensor_crop.out_height},
                       {"width", g.sensor_crop.out_width}}}};
  write_text(sidecar_path(path), doc.dump(2) + "\n");
}

optics::Psf read_psf(const fs::path& path, bool normalize) {
  RealImage img = read_image(path);
  const fs::path side = sidecar_path(path);
  if (!fs::exists(side)) {
    return optics::Psf::from_image(std::move(img), normalize ? optics::Normalization::unit_sum
                                                              : optics::Normalization::raw);
  }
  try {
    const auto doc = nlohmann::json::parse(read_text(side));
    optics::Psf psf;
    const auto norm = optics::parse_normalization(doc.at("normalization").get<std::string>());
    // float32 storage breaks the exact unit sum; restore it in double.
    if (norm == optics::Normalization::unit_sum) optics::normalize_unit_sum(img);
    psf.image = std::move(img);
    psf.normalization = norm;
    psf.variant = optics::parse_variant(doc.at("variant").get<std::string>());
    psf.wavelengths = doc.at("wavelengths").get<std::vector<double>>();
    const auto& g = doc.at("geometry");
    psf.geometry.d1 = g.at("d1").get<double>();
    psf.geometry.d2 = g.at("d2").get<double>();
    psf.geometry.sim_height = g.at("sim_height").get<std::size_t>();
    psf.geometry.sim_width = g.at("sim_width").get<std::size_t>();
    psf.geometry.sim_pitch = g.at("sim_pitch").get<double>();
    psf.geometry.oversample = g.at("oversample").get<std::size_t>();
    const auto& c = g.at("sensor_crop");
    psf.geometry.sensor_crop = {c.at("row_offset").get<std::size_t>(), c.at("col_offset").get<std::size_t>(),
                                c.at("height").get<std::size_t>(), c.at("width").get<std::size_t>()};
    psf.validate();
    return psf;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("PSF sidecar " + side.string() + ": " + e.what());
  }
}

std::string noise_to_json(const forward::NoiseSpec& spec) {
  ordered_json doc;
  doc["kind"] = forward::to_string(spec.kind);
  // JSON has no infinity; the disabled sentinel is written as null.
  doc["snr_db"] = spec.disabled() ? ordered_json(nullptr) : ordered_json(spec.snr_db);
  doc["seed"] = spec.seed;
  doc["snr_definition"] = "10*log10(|signal|^2 / E|noise|^2) over the whole image";
  return doc.dump(2) + "\n";
}

forward::NoiseSpec noise_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    forward::NoiseSpec spec;
    spec.kind = forward::parse_noise_kind(doc.at("kind").get<std::string>());
    if (!doc.at("snr_db").is_null()) spec.snr_db = doc.at("snr_db").get<double>();
    spec.seed = doc.value("seed", std::uint64_t{0});
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("noise sidecar: ") + e.what());
  }
}

std::string mask_to_json(const optics::MaskPattern& mask) {
  mask.validate();
  ordered_json doc;
  doc["rows"] = mask.rows;
  doc["cols"] = mask.cols;
  doc["aperture_width"] = mask.aperture_width;
  doc["aperture_height"] = mask.aperture_height;
  doc["pixel_pitch_x"] = mask.pixel_pitch_x;
  doc["pixel_pitch_y"] = mask.pixel_pitch_y;
  doc["deadspace"] = mask.deadspace_enabled;
  doc["layout"] = "weights[channel][row][col], channels R,G,B";
  doc["weights"] = mask.weights;
  return doc.dump(2) + "\n";
}

optics::MaskPattern mask_from_json(const std::string& text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    optics::MaskPattern mask = optics::MaskPattern::zeros(doc.at("rows").get<std::size_t>(),
                                                          doc.at("cols").get<std::size_t>());
    mask.aperture_width = doc.value("aperture_width", mask.aperture_width);
    mask.aperture_height = doc.value("aperture_height", mask.aperture_height);
    mask.pixel_pitch_x = doc.value("pixel_pitch_x", mask.pixel_pitch_x);
    mask.pixel_pitch_y = doc.value("pixel_pitch_y", mask.pixel_pitch_y);
    mask.deadspace_enabled = doc.value("deadspace", mask.deadspace_enabled);
    mask.weights = doc.at("weights").get<std::vector<double>>();
    mask.validate();
    return mask;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("mask JSON: ") + e.what());
  }
}

}  // namespace lensless::io
