#pragma once

#include <filesystem>
#include <vector>

namespace meshstyle {

/// Channel-major dense tensor (C x H x W). Used for RGB images, alpha masks
/// and latents alike.
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

double dot(const Image& a, const Image& b);

/// 8-bit PNG export; 1 channel -> gray, 3 -> RGB. Values clamped to [0,1].
void save_png(const std::filesystem::path& path, const Image& image);

/// Reads any 8/16-bit PNG into a 1-channel mask (luminance, or alpha if the
/// file has an alpha channel and no color) with values in [0,1].
Image load_png_mask(const std::filesystem::path& path);

}  // namespace meshstyle
