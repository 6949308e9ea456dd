#include "meshstyle/encoder.hpp"

#include "meshstyle/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <sstream>

namespace meshstyle {

EncoderMap EncoderMap::passthrough(int image_height, int image_width, int factor) {
  EncoderMap m;
  m.A.topLeftCorner<3, 3>().setIdentity();
  m.image_height = image_height;
  m.image_width = image_width;
  m.factor = factor;
  return m;
}

Image box_downsample(const Image& image, int factor) {
  if (factor < 1 || image.height % factor != 0 || image.width % factor != 0)
    throw DimensionError("box_downsample: image size must be a multiple of the factor");
  const int h = image.height / factor, w = image.width / factor;
  Image out(image.channels, h, w);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) out.at(c, y / factor, x / factor) += image.at(c, y, x);
  for (auto& v : out.data) v *= inv;
  return out;
}

Image box_downsample_adjoint(const Image& grad, int factor) {
  Image out(grad.channels, grad.height * factor, grad.width * factor);
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int c = 0; c < out.channels; ++c)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) out.at(c, y, x) = inv * grad.at(c, y / factor, x / factor);
  return out;
}

EncoderFitter::EncoderFitter(int image_height, int image_width, int factor)
    : height_(image_height), width_(image_width), factor_(factor) {
  if (factor < 1 || image_height <= 0 || image_width <= 0 || image_height % factor || image_width % factor)
    throw DimensionError("encoder fit: image size must be a positive multiple of the factor");
}

void EncoderFitter::add(const Image& image, const Image& latent) {
  if (image.channels != 3 || image.height != height_ || image.width != width_)
    throw DimensionError("encoder fit: image must be 3 x " + std::to_string(height_) + " x " +
                         std::to_string(width_));
  const int h = height_ / factor_, w = width_ / factor_;
  if (latent.channels != 4 || latent.height != h || latent.width != w)
    throw DimensionError("encoder fit: latent must be 4 x " + std::to_string(h) + " x " + std::to_string(w));
  const Image down = box_downsample(image, factor_);
  const std::size_t plane = down.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    const Eigen::Vector4d xb(down.data[p], down.data[plane + p], down.data[2 * plane + p], 1.0);
    const Eigen::Vector4d z(latent.data[p], latent.data[plane + p], latent.data[2 * plane + p],
                            latent.data[3 * plane + p]);
    xtx_.noalias() += xb * xb.transpose();
    xtz_.noalias() += xb * z.transpose();
    samples_xz_.insert(samples_xz_.end(), {xb[0], xb[1], xb[2], z[0], z[1], z[2], z[3]});
  }
  samples_ += static_cast<long long>(plane);
  ++pairs_;
}

EncoderMap EncoderFitter::finish() const {
  if (samples_ == 0) throw ValidationError("encoder fit: no samples");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(xtx_);
  const Eigen::Vector4d ev = eig.eigenvalues();
  if (!(ev[0] > 1e-12 * std::max(ev[3], 1.0)))
    throw ValidationError(
        "encoder fit: singular normal matrix (images lack independent color variation; "
        "constant or channel-collinear images cannot determine the map)");

  EncoderMap m;
  // xtx * A^T = xtz
  m.A = xtx_.fullPivLu().solve(xtz_).transpose();
  m.image_height = height_;
  m.image_width = width_;
  m.factor = factor_;
  m.samples = samples_;
  double sse = 0.0;
  for (std::size_t s = 0; s < samples_xz_.size(); s += 7) {
    const Eigen::Vector4d xb(samples_xz_[s], samples_xz_[s + 1], samples_xz_[s + 2], 1.0);
    const Eigen::Vector4d z(samples_xz_[s + 3], samples_xz_[s + 4], samples_xz_[s + 5], samples_xz_[s + 6]);
    sse += (z - m.A * xb).squaredNorm();
  }
  m.residual_rmse = std::sqrt(sse / (4.0 * static_cast<double>(samples_)));
  return m;
}

EncoderMap fit_affine_encoder(const std::vector<ImageLatentPair>& pairs, int factor) {
  if (pairs.empty()) throw ValidationError("encoder fit: empty pair set");
  EncoderFitter fitter(pairs.front().image.height, pairs.front().image.width, factor);
  for (const auto& pr : pairs) fitter.add(pr.image, pr.latent);
  return fitter.finish();
}

double encoder_rmse(const EncoderMap& map, const std::vector<ImageLatentPair>& pairs) {
  double sse = 0.0;
  std::size_t n = 0;
  for (const auto& pr : pairs) {
    const Image z = encode_approx(pr.image, map);
    if (!z.same_shape(pr.latent)) throw DimensionError("encoder_rmse: latent shape mismatch");
    for (std::size_t i = 0; i < z.size(); ++i) sse += (z.data[i] - pr.latent.data[i]) * (z.data[i] - pr.latent.data[i]);
    n += z.size();
  }
  return n ? std::sqrt(sse / static_cast<double>(n)) : 0.0;
}

Image encode_approx(const Image& image, const EncoderMap& map) {
  if (image.channels != 3 || image.height != map.image_height || image.width != map.image_width)
    throw DimensionError("encode_approx: image is " + std::to_string(image.channels) + "x" +
                         std::to_string(image.height) + "x" + std::to_string(image.width) +
                         ", encoder expects 3x" + std::to_string(map.image_height) + "x" +
                         std::to_string(map.image_width));
  const Image down = box_downsample(image, map.factor);
  const std::size_t plane = down.plane();
  Image z(4, down.height, down.width);
  for (std::size_t p = 0; p < plane; ++p) {
    const Eigen::Vector4d xb(down.data[p], down.data[plane + p], down.data[2 * plane + p], 1.0);
    const Eigen::Vector4d out = map.A * xb;
    for (int c = 0; c < 4; ++c) z.data[c * plane + p] = out[c];
  }
  return z;
}

Image encode_backward(const Image& dL_dz, const EncoderMap& map) {
  if (dL_dz.channels != 4 || dL_dz.height != map.latent_height() || dL_dz.width != map.latent_width())
    throw DimensionError("encode_backward: latent gradient shape mismatch");
  const std::size_t plane = dL_dz.plane();
  Image g_down(3, dL_dz.height, dL_dz.width);
  const Eigen::Matrix<double, 3, 4> At = map.A.leftCols<3>().transpose();
  for (std::size_t p = 0; p < plane; ++p) {
    const Eigen::Vector4d g(dL_dz.data[p], dL_dz.data[plane + p], dL_dz.data[2 * plane + p],
                            dL_dz.data[3 * plane + p]);
    const Eigen::Vector3d gx = At * g;
    for (int c = 0; c < 3; ++c) g_down.data[c * plane + p] = gx[c];
  }
  return box_downsample_adjoint(g_down, map.factor);
}

std::string format_encoder_map(const EncoderMap& map) {
  std::ostringstream os;
  char buf[64];
  os << "meshstyle-encoder 1\nA";
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof buf, " %.17g", map.A(r, c));
      os << buf;
    }
  std::snprintf(buf, sizeof buf, "%.17g", map.residual_rmse);
  os << "\nimage " << map.image_height << ' ' << map.image_width << "\nfactor " << map.factor
     << "\nresidual " << buf << "\nsamples " << map.samples << '\n';
  return os.str();
}

EncoderMap parse_encoder_map(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "meshstyle-encoder" || version != 1)
    throw ParseError("not a meshstyle encoder map (version 1)", 1);
  EncoderMap m;
  bool seen_a = false, seen_image = false;
  std::size_t line = 1;
  while (in >> tag) {
    ++line;
    if (tag == "A") {
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          if (!(in >> m.A(r, c))) throw ParseError("encoder map: A needs 16 entries", line);
      seen_a = true;
    } else if (tag == "image") {
      if (!(in >> m.image_height >> m.image_width)) throw ParseError("encoder map: bad image size", line);
      seen_image = true;
    } else if (tag == "factor") {
      if (!(in >> m.factor)) throw ParseError("encoder map: bad factor", line);
    } else if (tag == "residual") {
      if (!(in >> m.residual_rmse)) throw ParseError("encoder map: bad residual", line);
    } else if (tag == "samples") {
      if (!(in >> m.samples)) throw ParseError("encoder map: bad sample count", line);
    } else {
      throw ParseError("encoder map: unknown key '" + tag + "'", line);
    }
  }
  if (!seen_a || !seen_image) throw ValidationError("encoder map: missing A or image size");
  if (!m.A.allFinite()) throw ValidationError("encoder map: non-finite entries");
  if (m.factor < 1 || m.image_height % m.factor || m.image_width % m.factor)
    throw ValidationError("encoder map: image size must be a multiple of the factor");
  return m;
}

void save_encoder_map(const std::filesystem::path& path, const EncoderMap& map) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write encoder map: " + path.string());
  out << format_encoder_map(map);
}

EncoderMap load_encoder_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open encoder map: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_encoder_map(buf.str());
}

namespace {

constexpr char kPairMagic[] = "MSPAIR1\n";

static_assert(std::endian::native == std::endian::little, "pair files assume a little-endian host");

void write_image(std::ofstream& out, const Image& img) {
  const std::int32_t dims[3] = {img.channels, img.height, img.width};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.size() * sizeof(double)));
}

Image read_image(std::ifstream& in, const std::filesystem::path& path) {
  std::int32_t dims[3];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw IoError("truncated pair file: " + path.string());
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1 || dims[0] > 64 || dims[1] > 1 << 14 || dims[2] > 1 << 14)
    throw ParseError("pair file " + path.string() + ": bad tensor shape", 0);
  Image img(dims[0], dims[1], dims[2]);
  if (!in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.size() * sizeof(double))))
    throw IoError("truncated pair file: " + path.string());
  return img;
}

}  // namespace

void save_pair_file(const std::filesystem::path& path, const ImageLatentPair& pair) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write pair file: " + path.string());
  out.write(kPairMagic, 8);
  write_image(out, pair.image);
  write_image(out, pair.latent);
  if (!out) throw IoError("cannot write pair file: " + path.string());
}

ImageLatentPair load_pair_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open pair file: " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kPairMagic, 8) != 0)
    throw ParseError("not a meshstyle pair file: " + path.string(), 0);
  ImageLatentPair pair;
  pair.image = read_image(in, path);
  pair.latent = read_image(in, path);
  return pair;
}

std::vector<std::filesystem::path> list_pair_files(const std::filesystem::path& directory) {
  std::error_code ec;
  if (!std::filesystem::is_directory(directory, ec)) throw IoError("not a directory: " + directory.string());
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(directory))
    if (e.is_regular_file() && e.path().extension() == ".pair") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace meshstyle
