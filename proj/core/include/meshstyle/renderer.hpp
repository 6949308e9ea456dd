#pragma once

#include "meshstyle/camera.hpp"
#include "meshstyle/image.hpp"
#include "meshstyle/mesh.hpp"

#include <memory>
#include <vector>

namespace meshstyle {

struct SoftRasterParams {
  // Edge softness in NDC units; <= 0 selects 1 / (4 * resolution).
  double sigma_edge = 0.0;
  // Depth softmax temperature over normalized inverse depth.
  double gamma = 1e-2;
  // View depths mapped to normalized depth 1 (near) .. 0 (far). Faces with
  // any vertex closer than `near` are not drawn.
  double near = 1.0;
  double far = 10.0;
  // Fragments farther than cutoff * sigma outside a triangle are dropped
  // (coverage there is below sigmoid(-cutoff^2)).
  double cutoff = 4.0;
  bool keep_intermediates = true;

  double resolved_sigma(int resolution) const {
    return sigma_edge > 0.0 ? sigma_edge : 1.0 / (4.0 * resolution);
  }
};

struct RenderTape;

/// Soft-rasterized normal-shaded render. `rgb` is 3 x H x W, `alpha` is
/// 1 x H x W. `tape` holds what render_backward needs and is null when
/// intermediates were not requested.
struct RenderOutput {
  Image rgb;
  Image alpha;
  std::shared_ptr<const RenderTape> tape;
};

/// Per-pixel per-triangle coverage is sigmoid(sign(d) d^2 / sigma^2) for the
/// signed NDC distance d to the triangle boundary (positive inside). Alpha is
/// 1 - prod(1 - coverage); color is the coverage-weighted depth softmax of
/// face shades (0.5 + 0.5 n.l, headlight) composited over white.
RenderOutput render_soft(const VertexArray& vertices, const FaceArray& faces, const Camera& camera,
                         const SoftRasterParams& params = {});

/// Exact vertex gradient of a loss given its gradient w.r.t. rgb (3xHxW) and
/// alpha (1xHxW). Either image may be empty (treated as zero).
VertexArray render_backward(const RenderOutput& output, const Image& dL_drgb, const Image& dL_dalpha);

// Threshold alpha at 0.5.
Image hard_silhouette(const Image& alpha);
double silhouette_iou(const Image& a, const Image& b);

}  // namespace meshstyle
