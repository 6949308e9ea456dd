#pragma once

#include "meshstyle/image.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace meshstyle::wire {

inline constexpr int kProtocolVersion = 1;

/// Dense float32 tensor as carried on the wire: row-major, little-endian,
/// base64 encoded, with an explicit shape array.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  std::int64_t numel() const;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string encode_tensor_data(const std::vector<float>& values);
std::vector<float> decode_tensor_data(std::string_view text, std::int64_t expected_count);

// Stack same-shape images into a B x C x H x W tensor (narrowed to float32).
Tensor stack_images(const std::vector<Image>& images);
std::vector<Image> unstack_images(const Tensor& tensor);

struct SdsRequest {
  Tensor latents;  // B x 4 x h x w
  std::string prompt;
  std::string lora_id;
  double t_min = 0.02;
  double t_max = 0.98;
  double cfg_scale = 100.0;
  std::uint64_t seed = 0;
};

struct SdsResponse {
  Tensor grad_latent;  // B x 4 x h x w
  std::vector<double> t_sampled;
  std::vector<double> w_t;
};

struct EncodeRequest {
  Tensor images;  // B x 3 x H x W
};

struct EncodeResponse {
  Tensor latents;  // B x 4 x H/8 x W/8
};

// Serialization. Parsers throw ProtocolError on any violation, including a
// protocol_version other than kProtocolVersion.
std::string to_json(const SdsRequest& request);
std::string to_json(const SdsResponse& response);
std::string to_json(const EncodeRequest& request);
std::string to_json(const EncodeResponse& response);
SdsRequest parse_sds_request(std::string_view body);
SdsResponse parse_sds_response(std::string_view body);
EncodeRequest parse_encode_request(std::string_view body);
EncodeResponse parse_encode_response(std::string_view body);

}  // namespace meshstyle::wire
