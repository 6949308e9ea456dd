#include "meshstyle/guidance.hpp"

#include "meshstyle/error.hpp"

namespace meshstyle {

PixelGradient silhouette_oracle(const RenderOutput& render, const Image& target_mask) {
  const Image& alpha = render.alpha;
  if (target_mask.channels != 1 || target_mask.height != alpha.height || target_mask.width != alpha.width)
    throw DimensionError("silhouette_oracle: target mask is " + std::to_string(target_mask.height) + "x" +
                         std::to_string(target_mask.width) + ", render is " + std::to_string(alpha.height) +
                         "x" + std::to_string(alpha.width));
  PixelGradient out;
  out.grad_alpha = Image(1, alpha.height, alpha.width);
  const double inv = 1.0 / static_cast<double>(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double r = alpha.data[i] - target_mask.data[i];
    out.loss += r * r * inv;
    out.grad_alpha.data[i] = 2.0 * r * inv;
  }
  return out;
}

LatentGradient latent_target_oracle(const Image& latent, const Image& target_latent) {
  if (!latent.same_shape(target_latent)) throw DimensionError("latent_target_oracle: shape mismatch");
  LatentGradient out;
  out.grad = Image(latent.channels, latent.height, latent.width);
  const double inv = 1.0 / static_cast<double>(latent.size());
  for (std::size_t i = 0; i < latent.size(); ++i) {
    const double r = latent.data[i] - target_latent.data[i];
    out.loss += r * r * inv;
    out.grad.data[i] = 2.0 * r * inv;
  }
  return out;
}

ViewTarget fixed_target(Image target) {
  return [t = std::move(target)](const Camera&) { return t; };
}

ViewTarget mesh_silhouette_target(VertexArray vertices, FaceArray faces, SoftRasterParams params) {
  params.keep_intermediates = false;
  return [V = std::move(vertices), F = std::move(faces), params](const Camera& cam) {
    return render_soft(V, F, cam, params).alpha;
  };
}

ViewTarget mesh_latent_target(VertexArray vertices, FaceArray faces, SoftRasterParams params, EncoderMap map) {
  params.keep_intermediates = false;
  return [V = std::move(vertices), F = std::move(faces), params, map](const Camera& cam) {
    return encode_approx(render_soft(V, F, cam, params).rgb, map);
  };
}

GuidanceGradient SilhouetteGuidance::guide(const GuidanceBatch& batch) {
  GuidanceGradient g;
  g.provider = name();
  const auto n = batch.renders.size();
  for (std::size_t v = 0; v < n; ++v) {
    PixelGradient pg = silhouette_oracle(batch.renders[v], target_(batch.cameras[v]));
    g.loss += pg.loss / static_cast<double>(n);
    g.grad_alpha.push_back(std::move(pg.grad_alpha));
    g.grad_rgb.emplace_back();
  }
  return g;
}

GuidanceGradient LatentTargetGuidance::guide(const GuidanceBatch& batch) {
  if (batch.latents.size() != batch.renders.size())
    throw DimensionError("latent-target guidance: batch carries no latents");
  GuidanceGradient g;
  g.provider = name();
  const auto n = batch.latents.size();
  for (std::size_t v = 0; v < n; ++v) {
    LatentGradient lg = latent_target_oracle(batch.latents[v], target_(batch.cameras[v]));
    g.loss += lg.loss / static_cast<double>(n);
    g.grad_latent.push_back(std::move(lg.grad));
  }
  return g;
}

GuidanceGradient ZeroGuidance::guide(const GuidanceBatch& batch) {
  GuidanceGradient g;
  g.provider = name();
  for (std::size_t v = 0; v < batch.renders.size(); ++v) {
    if (domain_ == GuidanceDomain::Latent) {
      const Image& z = batch.latents.at(v);
      g.grad_latent.emplace_back(z.channels, z.height, z.width);
    } else {
      g.grad_rgb.emplace_back();
      g.grad_alpha.emplace_back();
    }
  }
  return g;
}

}  // namespace meshstyle
