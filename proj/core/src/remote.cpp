#include "meshstyle/remote.hpp"

#include "meshstyle/error.hpp"

#include <httplib.h>
#include <json.hpp>

#include <thread>

namespace meshstyle {

DiffusionClient::DiffusionClient(RemoteOptions options) : options_(std::move(options)) {
  if (options_.endpoint.empty()) throw ConfigError("diffusion service endpoint is empty");
  if (options_.retries < 0) throw ConfigError("retry count must be non-negative");
}

std::string DiffusionClient::post(const std::string& path, const std::string& body) const {
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options_.retry_delay);
    httplib::Client cli(options_.endpoint);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());
    auto res = cli.Post(path, body, "application/json");
    if (!res) {
      last_error = options_.endpoint + path + ": " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return res->body;
    const std::string msg = options_.endpoint + path + " returned HTTP " + std::to_string(res->status) +
                            (res->body.empty() ? "" : ": " + res->body.substr(0, 300));
    if (res->status >= 500) {
      last_error = msg;
      continue;
    }
    if (res->status == 400) throw ProtocolError(msg);
    throw ProviderError(msg, false);
  }
  throw ProviderError("diffusion service unavailable after " + std::to_string(options_.retries + 1) +
                          " attempts (" + last_error + ")",
                      true);
}

DiffusionClient::Health DiffusionClient::health() const {
  httplib::Client cli(options_.endpoint);
  cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(options_.timeout).count());
  auto res = cli.Get("/health");
  if (!res) throw ProviderError(options_.endpoint + "/health: " + httplib::to_string(res.error()), true);
  if (res->status != 200) throw ProviderError("/health returned HTTP " + std::to_string(res->status), false);
  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("/health: body is not a JSON object");
  Health h;
  h.protocol_version = j.value("protocol_version", 0);
  if (j.contains("lora_ids") && j["lora_ids"].is_array())
    for (const auto& id : j["lora_ids"])
      if (id.is_string()) h.lora_ids.push_back(id.get<std::string>());
  return h;
}

wire::SdsResponse DiffusionClient::sds_grad(const wire::SdsRequest& request) const {
  wire::SdsResponse r = wire::parse_sds_response(post("/sds_grad", wire::to_json(request)));
  if (r.grad_latent.shape != request.latents.shape)
    throw ProtocolError("sds_grad: response gradient shape does not match the request");
  return r;
}

std::vector<Image> DiffusionClient::encode(const std::vector<Image>& images) const {
  wire::EncodeRequest req{wire::stack_images(images)};
  const wire::EncodeResponse r = wire::parse_encode_response(post("/encode", wire::to_json(req)));
  const auto& s = req.images.shape;
  const std::vector<std::int64_t> expected{s[0], 4, s[2] / 8, s[3] / 8};
  if (r.latents.shape != expected) throw ProtocolError("encode: latent shape violates the H/8 x W/8 contract");
  return wire::unstack_images(r.latents);
}

RemoteSdsGuidance::RemoteSdsGuidance(RemoteOptions options, SdsSettings settings)
    : client_(std::move(options)), settings_(std::move(settings)) {
  if (!(0.0 < settings_.t_min && settings_.t_min < settings_.t_max && settings_.t_max < 1.0))
    throw ConfigError("SDS timestep range must satisfy 0 < t_min < t_max < 1");
}

GuidanceGradient RemoteSdsGuidance::guide(const GuidanceBatch& batch) {
  if (batch.latents.empty()) throw DimensionError("sds guidance: batch carries no latents");
  wire::SdsRequest req;
  req.latents = wire::stack_images(batch.latents);
  req.prompt = settings_.prompt;
  req.lora_id = settings_.lora_id;
  req.t_min = settings_.t_min;
  req.t_max = settings_.t_max;
  req.cfg_scale = settings_.cfg_scale;
  req.seed = batch.seed;
  wire::SdsResponse resp = client_.sds_grad(req);

  GuidanceGradient g;
  g.provider = name();
  g.grad_latent = wire::unstack_images(resp.grad_latent);
  g.timesteps = std::move(resp.t_sampled);
  g.weights = std::move(resp.w_t);
  return g;
}

}  // namespace meshstyle
