#pragma once

#include "meshstyle/image.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <vector>

namespace meshstyle {

/// Affine 4x4 channel map from box-downsampled RGB to latent channels:
/// z = A [x_down; 1] at every latent pixel.
struct EncoderMap {
  Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
  int image_height = 0;
  int image_width = 0;
  int factor = 8;
  double residual_rmse = 0.0;
  long long samples = 0;

  int latent_height() const { return image_height / factor; }
  int latent_width() const { return image_width / factor; }

  // RGB passthrough into channels 0..2, channel 3 zero.
  static EncoderMap passthrough(int image_height, int image_width, int factor = 8);
};

/// Mean over each factor x factor cell.
Image box_downsample(const Image& image, int factor);
/// Adjoint of box_downsample: every source pixel receives 1/factor^2 of its
/// cell's gradient.
Image box_downsample_adjoint(const Image& grad, int factor);

/// Least-squares fit over image/latent pairs. Normal equations are
/// accumulated in double precision in the order pairs are added, so refitting
/// the same sequence is bit-identical. Only the downsampled samples are kept
/// (for the residual), so full-size pairs may be dropped after add().
class EncoderFitter {
 public:
  EncoderFitter(int image_height, int image_width, int factor = 8);

  void add(const Image& image, const Image& latent);
  long long samples() const noexcept { return samples_; }
  int pairs() const noexcept { return pairs_; }

  // Throws ValidationError when the normal matrix is singular.
  EncoderMap finish() const;

 private:
  int height_, width_, factor_;
  Eigen::Matrix4d xtx_ = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d xtz_ = Eigen::Matrix4d::Zero();  // sum x_bar z^T
  std::vector<double> samples_xz_;  // 7 per sample: x_down (3), z (4)
  long long samples_ = 0;
  int pairs_ = 0;
};

struct ImageLatentPair {
  Image image;   // 3 x H x W
  Image latent;  // 4 x H/f x W/f
};

EncoderMap fit_affine_encoder(const std::vector<ImageLatentPair>& pairs, int factor = 8);

/// Root-mean-square latent residual of `map` over held-out pairs.
double encoder_rmse(const EncoderMap& map, const std::vector<ImageLatentPair>& pairs);

Image encode_approx(const Image& image, const EncoderMap& map);
Image encode_backward(const Image& dL_dz, const EncoderMap& map);

/// Text format: `meshstyle-encoder 1`, then `A` followed by 16 row-major
/// entries (%.17g), `image H W`, `factor f`, `residual r`, `samples n`.
void save_encoder_map(const std::filesystem::path& path, const EncoderMap& map);
EncoderMap load_encoder_map(const std::filesystem::path& path);
std::string format_encoder_map(const EncoderMap& map);
EncoderMap parse_encoder_map(const std::string& text);

/// Binary image/latent pair (`*.pair`): the bytes `MSPAIR1\n`, then for the
/// image and the latent three little-endian int32 (C, H, W) followed by
/// C*H*W little-endian float64 values.
void save_pair_file(const std::filesystem::path& path, const ImageLatentPair& pair);
ImageLatentPair load_pair_file(const std::filesystem::path& path);
// `*.pair` files of a directory in lexicographic order.
std::vector<std::filesystem::path> list_pair_files(const std::filesystem::path& directory);

}  // namespace meshstyle
