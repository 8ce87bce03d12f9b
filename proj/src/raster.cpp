#include "geoseg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include <png.h>

#include "geoseg/errors.hpp"

namespace geoseg {

namespace {

void require_dims(int width, int height, const char* what) {
  if (width < 0 || height < 0) {
    throw std::invalid_argument(std::string(what) + ": negative dimensions");
  }
}

std::size_t pixel_count(int width, int height) {
  return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
}

std::uint8_t blend_channel(std::uint8_t orig, std::uint8_t color, double alpha) {
  const double v = (1.0 - alpha) * orig + alpha * color;
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

std::vector<std::uint8_t> write_png(png_uint_32 format, int width, int height,
                                    const std::uint8_t* pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw CodecError(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw CodecError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

struct DecodedPng {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

DecodedPng read_png(std::span<const std::uint8_t> png, png_uint_32 format) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, png.data(), png.size())) {
    throw CodecError(std::string("png decode: ") + image.message);
  }
  image.format = format;
  DecodedPng out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  // Composite any alpha over black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&image, &background, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw CodecError(std::string("png decode: ") + image.message);
  }
  return out;
}

}  // namespace

Mask::Mask(int width, int height) : width_(width), height_(height) {
  require_dims(width, height, "Mask");
  bits_.assign(pixel_count(width, height), 0);
}

Mask::Mask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  require_dims(width, height, "Mask");
  if (bits_.size() != pixel_count(width, height)) {
    throw std::invalid_argument("Mask: bit count does not match width x height");
  }
  if (std::any_of(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b > 1; })) {
    throw std::invalid_argument("Mask: bits must be 0 or 1");
  }
}

Mask Mask::from_rows(const std::vector<std::vector<int>>& rows) {
  const int height = static_cast<int>(rows.size());
  const int width = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  std::vector<std::uint8_t> bits;
  bits.reserve(pixel_count(width, height));
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != width) {
      throw std::invalid_argument("Mask::from_rows: ragged rows");
    }
    for (int v : row) bits.push_back(static_cast<std::uint8_t>(v));
  }
  return Mask(width, height, std::move(bits));
}

RgbImage::RgbImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  require_dims(width, height, "RgbImage");
  data_.resize(pixel_count(width, height) * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  require_dims(width, height, "RgbImage");
  if (data_.size() != pixel_count(width, height) * 3) {
    throw std::invalid_argument("RgbImage: data size does not match width x height x 3");
  }
}

RleMask rle_encode(const Mask& mask) {
  RleMask rle;
  rle.height = mask.height();
  rle.width = mask.width();
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (std::uint8_t b : mask.bits()) {
    if (b != current) {
      rle.counts.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  if (run > 0 || rle.counts.empty()) rle.counts.push_back(run);
  return rle;
}

Mask rle_decode(const RleMask& rle) {
  if (rle.height < 0 || rle.width < 0) {
    throw CodecError("rle: negative size");
  }
  const std::size_t total = pixel_count(rle.width, rle.height);
  std::vector<std::uint8_t> bits;
  bits.reserve(total);
  std::uint8_t value = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::uint32_t n = rle.counts[i];
    if (n == 0 && i != 0 && total != 0) {
      throw CodecError("rle: zero-length interior run at index " + std::to_string(i));
    }
    if (bits.size() + n > total) {
      throw CodecError("rle: counts exceed height x width");
    }
    bits.insert(bits.end(), n, value);
    value ^= 1;
  }
  if (bits.size() != total) {
    throw CodecError("rle: counts sum to " + std::to_string(bits.size()) + ", expected " +
                     std::to_string(total));
  }
  return Mask(rle.width, rle.height, std::move(bits));
}

std::size_t mask_area(const Mask& mask) {
  return static_cast<std::size_t>(std::count(mask.bits().begin(), mask.bits().end(), 1));
}

Mask resize_nearest(const Mask& mask, int target_width, int target_height) {
  if (target_width < 1 || target_height < 1) {
    throw std::invalid_argument("resize_nearest: target dimensions must be >= 1");
  }
  if (mask.width() < 1 || mask.height() < 1) {
    throw std::invalid_argument("resize_nearest: source mask is empty");
  }
  if (mask.width() == target_width && mask.height() == target_height) return mask;

  const auto ws = static_cast<std::int64_t>(mask.width());
  const auto hs = static_cast<std::int64_t>(mask.height());
  std::vector<int> src_col(static_cast<std::size_t>(target_width));
  for (int j = 0; j < target_width; ++j) {
    src_col[static_cast<std::size_t>(j)] = static_cast<int>(j * ws / target_width);
  }
  Mask out(target_width, target_height);
  for (int i = 0; i < target_height; ++i) {
    const int si = static_cast<int>(i * hs / target_height);
    for (int j = 0; j < target_width; ++j) {
      if (mask.at(src_col[static_cast<std::size_t>(j)], si)) out.set(j, i, true);
    }
  }
  return out;
}

RgbImage render_overlay(const RgbImage& image, const Mask& gt, const Mask& pred, double alpha) {
  if (image.width() != gt.width() || image.height() != gt.height() || !gt.same_shape(pred)) {
    throw std::invalid_argument("render_overlay: image, gt and pred dimensions differ");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("render_overlay: alpha must lie in [0,1]");
  }
  static constexpr Rgb kYellow{255, 255, 0};
  static constexpr Rgb kGreen{0, 255, 0};
  static constexpr Rgb kRed{255, 0, 0};

  RgbImage out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const bool g = gt.at(x, y) != 0;
      const bool p = pred.at(x, y) != 0;
      if (!g && !p) continue;
      const Rgb color = g && p ? kYellow : (g ? kGreen : kRed);
      const Rgb orig = image.at(x, y);
      out.set(x, y, {blend_channel(orig.r, color.r, alpha), blend_channel(orig.g, color.g, alpha),
                     blend_channel(orig.b, color.b, alpha)});
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_mask_png(const Mask& mask) {
  if (mask.width() < 1 || mask.height() < 1) throw CodecError("png encode: empty mask");
  std::vector<std::uint8_t> gray(mask.size());
  std::transform(mask.bits().begin(), mask.bits().end(), gray.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  return write_png(PNG_FORMAT_GRAY, mask.width(), mask.height(), gray.data());
}

Mask decode_mask_png(std::span<const std::uint8_t> png) {
  DecodedPng d = read_png(png, PNG_FORMAT_GRAY);
  for (auto& v : d.pixels) v = v != 0 ? 1 : 0;
  return Mask(d.width, d.height, std::move(d.pixels));
}

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image) {
  if (image.width() < 1 || image.height() < 1) throw CodecError("png encode: empty image");
  return write_png(PNG_FORMAT_RGB, image.width(), image.height(), image.data().data());
}

RgbImage decode_rgb_png(std::span<const std::uint8_t> png) {
  DecodedPng d = read_png(png, PNG_FORMAT_RGB);
  return RgbImage(d.width, d.height, std::move(d.pixels));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

Mask read_mask_png(const std::filesystem::path& path) {
  return decode_mask_png(read_file_bytes(path));
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  write_file_bytes(path, encode_mask_png(mask));
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  return decode_rgb_png(read_file_bytes(path));
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  write_file_bytes(path, encode_rgb_png(image));
}

void to_json(nlohmann::json& j, const RleMask& rle) {
  j = nlohmann::json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

void from_json(const nlohmann::json& j, RleMask& rle) {
  try {
    const auto& size = j.at("size");
    if (!size.is_array() || size.size() != 2) throw CodecError("rle: size must be [h,w]");
    rle.height = size[0].get<int>();
    rle.width = size[1].get<int>();
    rle.counts = j.at("counts").get<std::vector<std::uint32_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw CodecError(std::string("rle json: ") + e.what());
  }
}

}  // namespace geoseg
