#pragma once

#include "meshstyle/guidance.hpp"
#include "meshstyle/wire.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace meshstyle {

struct RemoteOptions {
  // "http://host:port"
  std::string endpoint = "http://127.0.0.1:8000";
  int retries = 3;  // extra attempts after the first, on transport errors and 5xx
  std::chrono::milliseconds timeout{120000};
  std::chrono::milliseconds retry_delay{200};
};

/// Minimal client for the diffusion service. All calls are synchronous.
class DiffusionClient {
 public:
  explicit DiffusionClient(RemoteOptions options);

  struct Health {
    int protocol_version = 0;
    std::vector<std::string> lora_ids;
  };
  Health health() const;

  wire::SdsResponse sds_grad(const wire::SdsRequest& request) const;
  // B x 3 x H x W images -> B x 4 x H/8 x W/8 latents.
  std::vector<Image> encode(const std::vector<Image>& images) const;

  const RemoteOptions& options() const noexcept { return options_; }

 private:
  std::string post(const std::string& path, const std::string& body) const;

  RemoteOptions options_;
};

struct SdsSettings {
  std::string prompt = "A TOK style sculpture";
  std::string lora_id;
  double t_min = 0.02;
  double t_max = 0.98;
  double cfg_scale = 100.0;
};

/// Score-distillation guidance from the remote service. The returned latent
/// gradient is the service's w_t (eps_hat - eps), unchanged.
class RemoteSdsGuidance final : public GuidanceProvider {
 public:
  RemoteSdsGuidance(RemoteOptions options, SdsSettings settings);
  std::string name() const override { return "sds"; }
  GuidanceDomain domain() const override { return GuidanceDomain::Latent; }
  GuidanceGradient guide(const GuidanceBatch& batch) override;

 private:
  DiffusionClient client_;
  SdsSettings settings_;
};

}  // namespace meshstyle
