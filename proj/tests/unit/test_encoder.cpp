#include "meshstyle/encoder.hpp"
#include "meshstyle/error.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace meshstyle;

namespace {

Image random_image(std::mt19937_64& rng, int c, int h, int w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(c, h, w);
  for (double& v : img.data) v = u(rng);
  return img;
}

Eigen::Matrix4d random_map(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix4d A;
  for (int i = 0; i < 16; ++i) A.data()[i] = n(rng);
  return A;
}

// Independent forward model: mean over each 8x8 cell, then z = A [x; 1].
Image reference_encode(const Image& x, const Eigen::Matrix4d& A, int f = 8) {
  const int h = x.height / f, w = x.width / f;
  Image z(4, h, w);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      Eigen::Vector4d v(0, 0, 0, 1);
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int dy = 0; dy < f; ++dy)
          for (int dx = 0; dx < f; ++dx) s += x.at(c, y * f + dy, xx * f + dx);
        v[c] = s / (f * f);
      }
      const Eigen::Vector4d out = A * v;
      for (int c = 0; c < 4; ++c) z.at(c, y, xx) = out[c];
    }
  return z;
}

double objective(const Eigen::Matrix4d& A, const std::vector<ImageLatentPair>& pairs) {
  double s = 0.0;
  for (const auto& p : pairs) {
    const Image z = reference_encode(p.image, A);
    for (std::size_t i = 0; i < z.size(); ++i) s += (z.data[i] - p.latent.data[i]) * (z.data[i] - p.latent.data[i]);
  }
  return s;
}

}  // namespace

TEST_CASE("box downsample and its adjoint") {
  std::mt19937_64 rng(1);
  const Image x = random_image(rng, 3, 32, 24);
  const Image d = box_downsample(x, 8);
  CHECK(d.height == 4);
  CHECK(d.width == 3);
  double s = 0.0;
  for (int y = 0; y < 8; ++y)
    for (int xx = 0; xx < 8; ++xx) s += x.at(1, 8 + y, 16 + xx);
  CHECK(d.at(1, 1, 2) == doctest::Approx(s / 64.0).epsilon(1e-14));
  const Image u = random_image(rng, 3, 4, 3);
  CHECK(std::abs(dot(d, u) - dot(x, box_downsample_adjoint(u, 8))) <= 1e-12 * std::abs(dot(d, u)));
  CHECK_THROWS_AS(box_downsample(random_image(rng, 3, 30, 24), 8), DimensionError);
}

TEST_CASE("encode matches an independent forward model and its backward is the adjoint") {
  std::mt19937_64 rng(2);
  EncoderMap map;
  map.A = random_map(rng);
  map.image_height = 32;
  map.image_width = 48;
  const Image x = random_image(rng, 3, 32, 48);
  const Image z = encode_approx(x, map);
  const Image ref = reference_encode(x, map.A);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-13));

  // <encode(x) - encode(0), u> = <x, encode_backward(u)>
  const Image u = random_image(rng, 4, 4, 6);
  const Image z0 = encode_approx(Image(3, 32, 48), map);
  Image lin = z;
  for (std::size_t i = 0; i < lin.size(); ++i) lin.data[i] -= z0.data[i];
  const double lhs = dot(lin, u), rhs = dot(x, encode_backward(u, map));
  CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));

  // Central differences on a few pixels of L = <u, encode(x)>.
  const Image g = encode_backward(u, map);
  for (int k = 0; k < 20; ++k) {
    const std::size_t i = (k * 7919u) % x.size();
    Image xp = x, xm = x;
    xp.data[i] += 1e-4;
    xm.data[i] -= 1e-4;
    const double num = (dot(u, encode_approx(xp, map)) - dot(u, encode_approx(xm, map))) / 2e-4;
    CHECK(std::abs(num - g.data[i]) <= 1e-5 * std::max(1e-3, std::abs(g.data[i])));
  }
}

TEST_CASE("fitting recovers a known map exactly") {
  std::mt19937_64 rng(3);
  const Eigen::Matrix4d A = random_map(rng);
  std::vector<ImageLatentPair> pairs;
  for (int i = 0; i < 6; ++i) {
    Image x = random_image(rng, 3, 32, 32);
    pairs.push_back({x, reference_encode(x, A)});
  }
  const EncoderMap m = fit_affine_encoder(pairs);
  CHECK((m.A - A).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(m.residual_rmse < 1e-9);
  CHECK(m.samples == 6 * 16);
  CHECK(encoder_rmse(m, pairs) < 1e-9);
}

TEST_CASE("fitted map is the least-squares optimum") {
  std::mt19937_64 rng(4);
  const Eigen::Matrix4d A = random_map(rng);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<ImageLatentPair> pairs;
  for (int i = 0; i < 4; ++i) {
    Image x = random_image(rng, 3, 32, 32);
    Image z = reference_encode(x, A);
    for (double& v : z.data) v += noise(rng);
    pairs.push_back({x, z});
  }
  const EncoderMap m = fit_affine_encoder(pairs);
  const double best = objective(m.A, pairs);
  std::normal_distribution<double> n(0.0, 1e-3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix4d d;
    for (int i = 0; i < 16; ++i) d.data()[i] = n(rng);
    CHECK(objective(m.A + d, pairs) > best);
  }
  // Refitting the same sequence is bit-identical.
  const EncoderMap again = fit_affine_encoder(pairs);
  CHECK(again.A == m.A);
  CHECK(again.residual_rmse == m.residual_rmse);
}

TEST_CASE("residual tracks additive latent noise") {
  std::mt19937_64 rng(5);
  const Eigen::Matrix4d A = random_map(rng);
  const double sigma = 0.1;
  std::normal_distribution<double> noise(0.0, sigma);
  EncoderFitter fitter(64, 64);
  while (fitter.samples() < 100000) {
    const Image x = random_image(rng, 3, 64, 64);
    Image z = reference_encode(x, A);
    for (double& v : z.data) v += noise(rng);
    fitter.add(x, z);
  }
  const EncoderMap m = fitter.finish();
  CHECK(m.residual_rmse > 0.9 * sigma);
  CHECK(m.residual_rmse < 1.1 * sigma);
}

TEST_CASE("degenerate inputs are rejected") {
  EncoderFitter fitter(16, 16);
  CHECK_THROWS_AS(fitter.finish(), ValidationError);  // no samples
  // Gray images leave the RGB columns collinear.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 4; ++i) {
    Image x(3, 16, 16);
    for (int y = 0; y < 16; ++y)
      for (int xx = 0; xx < 16; ++xx) {
        const double g = u(rng);
        for (int c = 0; c < 3; ++c) x.at(c, y, xx) = g;
      }
    fitter.add(x, Image(4, 2, 2));
  }
  CHECK_THROWS_AS(fitter.finish(), ValidationError);
  CHECK_THROWS_AS(fitter.add(Image(3, 8, 8), Image(4, 1, 1)), DimensionError);
}

TEST_CASE("passthrough map") {
  std::mt19937_64 rng(7);
  const EncoderMap m = EncoderMap::passthrough(16, 16);
  const Image x = random_image(rng, 3, 16, 16);
  const Image z = encode_approx(x, m);
  const Image d = box_downsample(x, 8);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 4; ++i) CHECK(z.data[c * 4 + i] == doctest::Approx(d.data[c * 4 + i]));
  for (int i = 0; i < 4; ++i) CHECK(z.data[12 + i] == 0.0);
}

TEST_CASE("encoder map text format round trips exactly") {
  std::mt19937_64 rng(8);
  EncoderMap m;
  m.A = random_map(rng);
  m.image_height = 512;
  m.image_width = 256;
  m.residual_rmse = 1.234567890123e-7;
  m.samples = 123456;
  const EncoderMap back = parse_encoder_map(format_encoder_map(m));
  CHECK(back.A == m.A);
  CHECK(back.image_height == 512);
  CHECK(back.image_width == 256);
  CHECK(back.factor == 8);
  CHECK(back.residual_rmse == m.residual_rmse);
  CHECK(back.samples == 123456);
  CHECK_THROWS_AS(parse_encoder_map("something else"), ParseError);
  CHECK_THROWS_AS(parse_encoder_map("meshstyle-encoder 1\nA 1 2 3\n"), ParseError);
  CHECK_THROWS_AS(parse_encoder_map("meshstyle-encoder 1\nimage 16 16\n"), ValidationError);
}

TEST_CASE("pair files") {
  std::mt19937_64 rng(9);
  const auto dir = std::filesystem::temp_directory_path() / "meshstyle_pairs_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const ImageLatentPair p{random_image(rng, 3, 16, 8), random_image(rng, 4, 2, 1)};
  save_pair_file(dir / "b.pair", p);
  save_pair_file(dir / "a.pair", p);
  std::ofstream(dir / "notes.txt") << "ignored";
  const auto files = list_pair_files(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.pair");
  const ImageLatentPair q = load_pair_file(files[1]);
  CHECK(q.image.data == p.image.data);
  CHECK(q.latent.data == p.latent.data);
  CHECK(q.latent.channels == 4);
  std::ofstream(dir / "bad.pair") << "garbage";
  CHECK_THROWS_AS(load_pair_file(dir / "bad.pair"), ParseError);
  CHECK_THROWS_AS(list_pair_files(dir / "missing"), IoError);
  std::filesystem::remove_all(dir);
}
