#include "meshstyle/wire.hpp"

#include "meshstyle/error.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>

namespace meshstyle::wire {

using nlohmann::json;

std::int64_t Tensor::numel() const {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 payload length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string encode_tensor_data(const std::vector<float>& values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t u = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(u >> (8 * b));
  }
  return base64_encode(bytes);
}

std::vector<float> decode_tensor_data(std::string_view text, std::int64_t expected_count) {
  const auto bytes = base64_decode(text);
  if (expected_count < 0 || bytes.size() != static_cast<std::size_t>(expected_count) * 4)
    throw ProtocolError("tensor payload has " + std::to_string(bytes.size()) + " bytes, shape implies " +
                        std::to_string(expected_count * 4));
  std::vector<float> out(static_cast<std::size_t>(expected_count));
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

Tensor stack_images(const std::vector<Image>& images) {
  Tensor t;
  if (images.empty()) throw DimensionError("stack_images: empty batch");
  const Image& first = images.front();
  t.shape = {static_cast<std::int64_t>(images.size()), first.channels, first.height, first.width};
  t.data.reserve(images.size() * first.size());
  for (const auto& im : images) {
    if (!im.same_shape(first)) throw DimensionError("stack_images: images differ in shape");
    for (double v : im.data) t.data.push_back(static_cast<float>(v));
  }
  return t;
}

std::vector<Image> unstack_images(const Tensor& t) {
  if (t.shape.size() != 4) throw ProtocolError("expected a rank-4 tensor");
  const auto b = t.shape[0];
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(b));
  const auto per = static_cast<std::size_t>(t.shape[1] * t.shape[2] * t.shape[3]);
  for (std::int64_t i = 0; i < b; ++i) {
    Image im(static_cast<int>(t.shape[1]), static_cast<int>(t.shape[2]), static_cast<int>(t.shape[3]));
    for (std::size_t k = 0; k < per; ++k) im.data[k] = t.data[static_cast<std::size_t>(i) * per + k];
    out.push_back(std::move(im));
  }
  return out;
}

namespace {

json tensor_json(const Tensor& t) {
  if (t.numel() != static_cast<std::int64_t>(t.data.size()))
    throw DimensionError("tensor data does not match its shape");
  return json{{"shape", t.shape}, {"data", encode_tensor_data(t.data)}};
}

Tensor tensor_from_json(const json& j, const char* name) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data") || !j["shape"].is_array() ||
      !j["data"].is_string())
    throw ProtocolError(std::string("tensor '") + name + "' needs 'shape' array and 'data' string");
  Tensor t;
  for (const auto& d : j["shape"]) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0)
      throw ProtocolError(std::string("tensor '") + name + "' has an invalid shape entry");
    t.shape.push_back(d.get<std::int64_t>());
  }
  t.data = decode_tensor_data(j["data"].get<std::string>(), t.numel());
  for (float v : t.data)
    if (!std::isfinite(v)) throw ProtocolError(std::string("tensor '") + name + "' has non-finite entries");
  return t;
}

json parse_envelope(std::string_view body) {
  json j = json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("body is not a JSON object");
  if (!j.contains("protocol_version") || !j["protocol_version"].is_number_integer())
    throw ProtocolError("missing protocol_version");
  const int v = j["protocol_version"].get<int>();
  if (v != kProtocolVersion)
    throw ProtocolError("protocol version mismatch: got " + std::to_string(v) + ", expected " +
                        std::to_string(kProtocolVersion));
  if (!j.contains("tensors") || !j["tensors"].is_object()) throw ProtocolError("missing 'tensors' object");
  return j;
}

Tensor named_tensor(const json& j, const char* name) {
  if (!j["tensors"].contains(name)) throw ProtocolError(std::string("missing tensor '") + name + "'");
  return tensor_from_json(j["tensors"][name], name);
}

std::vector<double> number_list(const json& j, const char* name) {
  // accepted either as a plain JSON array or as a tensor
  std::vector<double> out;
  if (j.contains(name) && j[name].is_array()) {
    for (const auto& v : j[name]) {
      if (!v.is_number()) throw ProtocolError(std::string("'") + name + "' must hold numbers");
      out.push_back(v.get<double>());
    }
  } else if (j["tensors"].contains(name)) {
    for (float v : tensor_from_json(j["tensors"][name], name).data) out.push_back(v);
  } else {
    throw ProtocolError(std::string("missing '") + name + "'");
  }
  return out;
}

template <typename T>
T get_field(const json& j, const char* name) {
  if (!j.contains(name)) throw ProtocolError(std::string("missing field '") + name + "'");
  try {
    return j[name].get<T>();
  } catch (const json::exception&) {
    throw ProtocolError(std::string("field '") + name + "' has the wrong type");
  }
}

void require_rank4(const Tensor& t, std::int64_t channels, const char* name) {
  if (t.shape.size() != 4 || t.shape[0] < 1 || t.shape[1] != channels)
    throw ProtocolError(std::string("tensor '") + name + "' must be B x " + std::to_string(channels) +
                        " x H x W with B >= 1");
}

}  // namespace

std::string to_json(const SdsRequest& r) {
  json j{{"protocol_version", kProtocolVersion},
         {"tensors", {{"latents", tensor_json(r.latents)}}},
         {"prompt", r.prompt},
         {"lora_id", r.lora_id},
         {"t_min", r.t_min},
         {"t_max", r.t_max},
         {"cfg_scale", r.cfg_scale},
         {"seed", r.seed}};
  return j.dump();
}

std::string to_json(const SdsResponse& r) {
  Tensor t_sampled{{static_cast<std::int64_t>(r.t_sampled.size())}, {}};
  Tensor w_t{{static_cast<std::int64_t>(r.w_t.size())}, {}};
  for (double v : r.t_sampled) t_sampled.data.push_back(static_cast<float>(v));
  for (double v : r.w_t) w_t.data.push_back(static_cast<float>(v));
  json j{{"protocol_version", kProtocolVersion},
         {"tensors",
          {{"grad_latent", tensor_json(r.grad_latent)},
           {"t_sampled", tensor_json(t_sampled)},
           {"w_t", tensor_json(w_t)}}}};
  return j.dump();
}

std::string to_json(const EncodeRequest& r) {
  return json{{"protocol_version", kProtocolVersion}, {"tensors", {{"images", tensor_json(r.images)}}}}.dump();
}

std::string to_json(const EncodeResponse& r) {
  return json{{"protocol_version", kProtocolVersion}, {"tensors", {{"latents", tensor_json(r.latents)}}}}.dump();
}

SdsRequest parse_sds_request(std::string_view body) {
  const json j = parse_envelope(body);
  SdsRequest r;
  r.latents = named_tensor(j, "latents");
  require_rank4(r.latents, 4, "latents");
  r.prompt = get_field<std::string>(j, "prompt");
  r.lora_id = get_field<std::string>(j, "lora_id");
  r.t_min = get_field<double>(j, "t_min");
  r.t_max = get_field<double>(j, "t_max");
  r.cfg_scale = get_field<double>(j, "cfg_scale");
  r.seed = get_field<std::uint64_t>(j, "seed");
  if (!(0.0 < r.t_min && r.t_min <= r.t_max && r.t_max < 1.0))
    throw ProtocolError("timestep range must satisfy 0 < t_min <= t_max < 1");
  return r;
}

SdsResponse parse_sds_response(std::string_view body) {
  const json j = parse_envelope(body);
  SdsResponse r;
  r.grad_latent = named_tensor(j, "grad_latent");
  require_rank4(r.grad_latent, 4, "grad_latent");
  r.t_sampled = number_list(j, "t_sampled");
  r.w_t = number_list(j, "w_t");
  return r;
}

EncodeRequest parse_encode_request(std::string_view body) {
  const json j = parse_envelope(body);
  EncodeRequest r{named_tensor(j, "images")};
  require_rank4(r.images, 3, "images");
  return r;
}

EncodeResponse parse_encode_response(std::string_view body) {
  const json j = parse_envelope(body);
  EncodeResponse r{named_tensor(j, "latents")};
  require_rank4(r.latents, 4, "latents");
  return r;
}

}  // namespace meshstyle::wire
