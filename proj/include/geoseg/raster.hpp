#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace geoseg {

// Binary raster, row-major, one byte per pixel holding exactly 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height);  // all-zero
  Mask(int width, int height, std::vector<std::uint8_t> bits);

  static Mask from_rows(const std::vector<std::vector<int>>& rows);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  std::uint8_t at(int x, int y) const { return bits_[index(x, y)]; }
  void set(int x, int y, bool on) { bits_[index(x, y)] = on ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  bool same_shape(const Mask& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Interleaved 8-bit RGB raster.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {});
  RgbImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }

  Rgb at(int x, int y) const {
    const std::size_t i = offset(x, y);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = offset(x, y);
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }

  std::span<const std::uint8_t> data() const { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Row-major run lengths, alternating, first run counts zeros.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;
  friend bool operator==(const RleMask&, const RleMask&) = default;
};

RleMask rle_encode(const Mask& mask);
// Throws CodecError when counts do not tile height x width.
Mask rle_decode(const RleMask& rle);

std::size_t mask_area(const Mask& mask);

// Nearest-neighbour: target (i,j) samples source (floor(i*hs/ht), floor(j*ws/wt)).
Mask resize_nearest(const Mask& mask, int target_width, int target_height);

inline constexpr double kDefaultOverlayAlpha = 0.5;

// gt&pred -> yellow, gt only -> green, pred only -> red, blended with
// (1-alpha)*orig + alpha*color, rounded half-up.
RgbImage render_overlay(const RgbImage& image, const Mask& gt, const Mask& pred,
                        double alpha = kDefaultOverlayAlpha);

// PNG codecs. Masks are stored as 8-bit grayscale 0/255; any nonzero
// sample decodes as foreground.
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);
Mask decode_mask_png(std::span<const std::uint8_t> png);
std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image);
RgbImage decode_rgb_png(std::span<const std::uint8_t> png);

Mask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const Mask& mask);
RgbImage read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbImage& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// {"size":[h,w],"counts":[...]}
void to_json(nlohmann::json& j, const RleMask& rle);
void from_json(const nlohmann::json& j, RleMask& rle);

}  // namespace geoseg
