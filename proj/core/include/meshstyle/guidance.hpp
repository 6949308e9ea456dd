#pragma once

#include "meshstyle/camera.hpp"
#include "meshstyle/encoder.hpp"
#include "meshstyle/image.hpp"
#include "meshstyle/renderer.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace meshstyle {

enum class GuidanceDomain { Pixel, Latent };

/// One guidance query: a batch of views rendered this step. `latents` is
/// filled (via the approximate encoder) only for latent-domain providers.
struct GuidanceBatch {
  std::vector<Camera> cameras;
  std::vector<RenderOutput> renders;
  std::vector<Image> latents;
  std::uint64_t seed = 0;
  long iteration = 0;
  bool auxiliary = false;  // renders show the coarse auxiliary mesh
};

/// Per-view gradients of the provider's loss (not yet batch-averaged).
/// Pixel providers fill grad_rgb/grad_alpha (either may be empty images);
/// latent providers fill grad_latent.
struct GuidanceGradient {
  std::string provider;
  std::vector<Image> grad_rgb;
  std::vector<Image> grad_alpha;
  std::vector<Image> grad_latent;
  std::vector<double> timesteps;
  std::vector<double> weights;
  // Batch-mean loss when the provider has one (analytic oracles); SDS has no
  // scalar objective and reports 0.
  double loss = 0.0;
};

class GuidanceProvider {
 public:
  virtual ~GuidanceProvider() = default;
  virtual std::string name() const = 0;
  virtual GuidanceDomain domain() const = 0;
  virtual GuidanceGradient guide(const GuidanceBatch& batch) = 0;
};

struct PixelGradient {
  double loss = 0.0;
  Image grad_alpha;
};

/// L = mean((alpha - target)^2); gradient w.r.t. alpha only.
PixelGradient silhouette_oracle(const RenderOutput& render, const Image& target_mask);

struct LatentGradient {
  double loss = 0.0;
  Image grad;
};

/// L = mean((z - z_target)^2) over all 4 x h x w entries.
LatentGradient latent_target_oracle(const Image& latent, const Image& target_latent);

using ViewTarget = std::function<Image(const Camera&)>;

// Same mask for every view.
ViewTarget fixed_target(Image target);
// Alpha of a soft render of a reference mesh from the query camera.
ViewTarget mesh_silhouette_target(VertexArray vertices, FaceArray faces, SoftRasterParams params);
// Approximate latent of a render of a reference mesh from the query camera.
ViewTarget mesh_latent_target(VertexArray vertices, FaceArray faces, SoftRasterParams params, EncoderMap map);

class SilhouetteGuidance final : public GuidanceProvider {
 public:
  explicit SilhouetteGuidance(ViewTarget target) : target_(std::move(target)) {}
  std::string name() const override { return "silhouette"; }
  GuidanceDomain domain() const override { return GuidanceDomain::Pixel; }
  GuidanceGradient guide(const GuidanceBatch& batch) override;

 private:
  ViewTarget target_;
};

class LatentTargetGuidance final : public GuidanceProvider {
 public:
  explicit LatentTargetGuidance(ViewTarget target) : target_(std::move(target)) {}
  std::string name() const override { return "latent-target"; }
  GuidanceDomain domain() const override { return GuidanceDomain::Latent; }
  GuidanceGradient guide(const GuidanceBatch& batch) override;

 private:
  ViewTarget target_;
};

/// Zero gradient in the chosen domain; turns every step into a pure
/// regularizer step.
class ZeroGuidance final : public GuidanceProvider {
 public:
  explicit ZeroGuidance(GuidanceDomain domain = GuidanceDomain::Pixel) : domain_(domain) {}
  std::string name() const override { return "zero"; }
  GuidanceDomain domain() const override { return domain_; }
  GuidanceGradient guide(const GuidanceBatch& batch) override;

 private:
  GuidanceDomain domain_;
};

}  // namespace meshstyle
