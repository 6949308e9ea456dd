#include "meshstyle/renderer.hpp"

#include "meshstyle/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace meshstyle {

using Vec2 = Eigen::Vector2d;

struct RenderTape {
  Camera camera;
  SoftRasterParams params;
  double sigma = 0.0;
  VertexArray vertices;
  FaceArray faces;

  // per vertex
  std::vector<Vec2> screen;
  std::vector<double> depth;
  // per face
  std::vector<char> drawn;
  std::vector<double> shade;
  std::vector<Vec3> normal;  // unnormalized face normal

  // fragments grouped by pixel: [offset[p], offset[p+1])
  std::vector<int> offset;
  std::vector<int> frag_face;
  std::vector<double> frag_cov;
  std::vector<double> frag_zn;
  // per pixel
  std::vector<double> weight_sum;  // sum_j D_j exp((zn_j - zmax) / gamma)
  std::vector<double> zmax;
  std::vector<double> surface;  // softmax-blended shade
};

namespace {

double cross2(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec2 pixel_center(int x, int y, int res) {
  return {-1.0 + (2.0 * x + 1.0) / res, 1.0 - (2.0 * y + 1.0) / res};
}

// Signed distance from p to the triangle boundary (positive inside) and its
// gradient with respect to the three corners.
struct SignedDistance {
  double value = 0.0;
  Vec2 grad[3];
};

SignedDistance signed_distance(const Vec2& p, const Vec2 a[3]) {
  const double area = cross2(a[1] - a[0], a[2] - a[0]);
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  int best_edge = 0;
  double best_t = 0.0;
  Vec2 best_diff = Vec2::Zero();
  for (int k = 0; k < 3; ++k) {
    const Vec2& s = a[k];
    const Vec2& e = a[(k + 1) % 3];
    const Vec2 edge = e - s;
    if (cross2(edge, p - s) * area < 0.0) inside = false;
    const double len2 = edge.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - s).dot(edge) / len2, 0.0, 1.0) : 0.0;
    const Vec2 diff = p - (s + t * edge);
    const double dist = diff.norm();
    if (dist < best) {
      best = dist;
      best_edge = k;
      best_t = t;
      best_diff = diff;
    }
  }
  SignedDistance out;
  const double sign = inside ? 1.0 : -1.0;
  out.value = sign * best;
  for (auto& g : out.grad) g.setZero();
  Vec2 u;
  if (best > 0.0) {
    u = best_diff / best;
  } else {
    const Vec2 edge = a[(best_edge + 1) % 3] - a[best_edge];
    u = Vec2(edge.y(), -edge.x()).normalized();
  }
  // d dist / d q = -u, q = s + t (e - s); t's own variation is orthogonal to u
  // in the interior and zero when clamped.
  out.grad[best_edge] = -sign * (1.0 - best_t) * u;
  out.grad[(best_edge + 1) % 3] = -sign * best_t * u;
  return out;
}

// Barycentric interpolation of per-corner values in screen space, with the
// gradient w.r.t. corner positions and the barycentric weights.
struct Interp {
  double value = 0.0;
  double bary[3] = {0, 0, 0};
  Vec2 grad[3];
};

Interp interpolate(const Vec2& p, const Vec2 a[3], const double z[3]) {
  Interp out;
  const double area = cross2(a[1] - a[0], a[2] - a[0]);
  double num = 0.0;
  Vec2 dnum[3] = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
  for (int k = 0; k < 3; ++k) {
    const int i1 = (k + 1) % 3, i2 = (k + 2) % 3;
    const Vec2 u = a[i1] - p, v = a[i2] - p;
    const double c = cross2(u, v);
    out.bary[k] = c / area;
    num += z[k] * c;
    dnum[i1] += z[k] * Vec2(v.y(), -v.x());
    dnum[i2] += z[k] * Vec2(-u.y(), u.x());
  }
  out.value = num / area;
  const Vec2 w = a[2] - a[0], u = a[1] - a[0];
  Vec2 darea[3];
  darea[1] = Vec2(w.y(), -w.x());
  darea[2] = Vec2(-u.y(), u.x());
  darea[0] = -darea[1] - darea[2];
  for (int k = 0; k < 3; ++k) out.grad[k] = (dnum[k] - out.value * darea[k]) / area;
  return out;
}

double normalized_depth(double depth, const SoftRasterParams& p) {
  return (p.far - depth) / (p.far - p.near);
}

}  // namespace

RenderOutput render_soft(const VertexArray& vertices, const FaceArray& faces, const Camera& camera,
                         const SoftRasterParams& params) {
  if (!vertices.allFinite()) throw ValidationError("render_soft: non-finite vertex coordinates");
  if (!(params.far > params.near && params.near > 0.0))
    throw ValidationError("render_soft: need 0 < near < far");
  if (!(params.gamma > 0.0)) throw ValidationError("render_soft: gamma must be positive");
  for (Eigen::Index f = 0; f < faces.rows(); ++f)
    for (int k = 0; k < 3; ++k)
      if (faces(f, k) < 0 || faces(f, k) >= vertices.rows())
        throw ValidationError("render_soft: face index out of range");

  const int res = camera.resolution();
  const auto tape = std::make_shared<RenderTape>(RenderTape{camera, params, params.resolved_sigma(res),
                                                            vertices, faces, {}, {}, {}, {}, {},
                                                            {}, {}, {}, {}, {}, {}, {}});
  RenderTape& T = *tape;
  const double sigma = T.sigma;
  const double inv_sigma2 = 1.0 / (sigma * sigma);
  const double reach = params.cutoff * sigma;
  const auto nv = vertices.rows();
  const auto nf = faces.rows();
  const std::size_t npix = static_cast<std::size_t>(res) * res;

  T.screen.resize(static_cast<std::size_t>(nv));
  T.depth.resize(static_cast<std::size_t>(nv));
  for (Eigen::Index i = 0; i < nv; ++i) {
    const Vec3 q = camera.to_view(vertices.row(i).transpose());
    T.depth[i] = q.z();
    const double s = 1.0 / (q.z() * camera.tan_half_fov());
    T.screen[i] = Vec2(q.x() * s, q.y() * s);
  }

  const Vec3 light = camera.headlight();
  T.drawn.assign(static_cast<std::size_t>(nf), 0);
  T.shade.assign(static_cast<std::size_t>(nf), 1.0);
  T.normal.assign(static_cast<std::size_t>(nf), Vec3::Zero());

  // First pass: collect (pixel, face) candidates in face order.
  std::vector<std::pair<int, int>> candidates;
  std::vector<double> cand_cov, cand_zn;
  for (Eigen::Index f = 0; f < nf; ++f) {
    const int i0 = faces(f, 0), i1 = faces(f, 1), i2 = faces(f, 2);
    if (T.depth[i0] < params.near || T.depth[i1] < params.near || T.depth[i2] < params.near) continue;
    const Vec2 a[3] = {T.screen[i0], T.screen[i1], T.screen[i2]};
    if (std::abs(cross2(a[1] - a[0], a[2] - a[0])) < 1e-14) continue;
    const Vec3 n = face_cross(vertices, faces, static_cast<int>(f));
    const double nn = n.norm();
    if (!(nn > 0.0)) continue;
    T.drawn[f] = 1;
    T.normal[f] = n;
    T.shade[f] = 0.5 + 0.5 * n.dot(light) / nn;

    const double zk[3] = {normalized_depth(T.depth[i0], params), normalized_depth(T.depth[i1], params),
                          normalized_depth(T.depth[i2], params)};
    const double xmin = std::min({a[0].x(), a[1].x(), a[2].x()}) - reach;
    const double xmax = std::max({a[0].x(), a[1].x(), a[2].x()}) + reach;
    const double ymin = std::min({a[0].y(), a[1].y(), a[2].y()}) - reach;
    const double ymax = std::max({a[0].y(), a[1].y(), a[2].y()}) + reach;
    // pixel x center: -1 + (2x+1)/res ; pixel y center: 1 - (2y+1)/res
    const int px0 = std::max(0, static_cast<int>(std::floor(((xmin + 1.0) * res - 1.0) / 2.0)));
    const int px1 = std::min(res - 1, static_cast<int>(std::ceil(((xmax + 1.0) * res - 1.0) / 2.0)));
    const int py0 = std::max(0, static_cast<int>(std::floor(((1.0 - ymax) * res - 1.0) / 2.0)));
    const int py1 = std::min(res - 1, static_cast<int>(std::ceil(((1.0 - ymin) * res - 1.0) / 2.0)));
    for (int y = py0; y <= py1; ++y) {
      for (int x = px0; x <= px1; ++x) {
        const Vec2 p = pixel_center(x, y, res);
        const SignedDistance sd = signed_distance(p, a);
        if (sd.value <= -reach) continue;
        const double arg = (sd.value >= 0.0 ? 1.0 : -1.0) * sd.value * sd.value * inv_sigma2;
        candidates.emplace_back(y * res + x, static_cast<int>(f));
        cand_cov.push_back(sigmoid(arg));
        cand_zn.push_back(interpolate(p, a, zk).value);
      }
    }
  }

  // Counting sort by pixel; stable, so faces stay ascending within a pixel.
  T.offset.assign(npix + 1, 0);
  for (const auto& c : candidates) ++T.offset[c.first + 1];
  for (std::size_t p = 0; p < npix; ++p) T.offset[p + 1] += T.offset[p];
  std::vector<int> cursor(T.offset.begin(), T.offset.end() - 1);
  T.frag_face.resize(candidates.size());
  T.frag_cov.resize(candidates.size());
  T.frag_zn.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const int slot = cursor[candidates[c].first]++;
    T.frag_face[slot] = candidates[c].second;
    T.frag_cov[slot] = cand_cov[c];
    T.frag_zn[slot] = cand_zn[c];
  }

  RenderOutput out;
  out.rgb = Image(3, res, res, 1.0);
  out.alpha = Image(1, res, res, 0.0);
  T.weight_sum.assign(npix, 0.0);
  T.zmax.assign(npix, 0.0);
  T.surface.assign(npix, 1.0);
  const double inv_gamma = 1.0 / params.gamma;
  for (std::size_t p = 0; p < npix; ++p) {
    const int b = T.offset[p], e = T.offset[p + 1];
    if (b == e) continue;
    double transmit = 1.0, zmax = -std::numeric_limits<double>::infinity();
    for (int k = b; k < e; ++k) {
      transmit *= 1.0 - T.frag_cov[k];
      zmax = std::max(zmax, T.frag_zn[k]);
    }
    double wsum = 0.0, csum = 0.0;
    for (int k = b; k < e; ++k) {
      const double w = T.frag_cov[k] * std::exp((T.frag_zn[k] - zmax) * inv_gamma);
      wsum += w;
      csum += w * T.shade[T.frag_face[k]];
    }
    const double alpha = 1.0 - transmit;
    const double surface = wsum > 0.0 ? csum / wsum : 1.0;
    T.weight_sum[p] = wsum;
    T.zmax[p] = zmax;
    T.surface[p] = surface;
    out.alpha.data[p] = alpha;
    const double color = alpha * surface + (1.0 - alpha);
    for (int c = 0; c < 3; ++c) out.rgb.data[c * npix + p] = color;
  }

  if (params.keep_intermediates) out.tape = tape;
  return out;
}

VertexArray render_backward(const RenderOutput& output, const Image& dL_drgb, const Image& dL_dalpha) {
  if (!output.tape) throw ValidationError("render_backward: render was produced without intermediates");
  const RenderTape& T = *output.tape;
  const int res = T.camera.resolution();
  const std::size_t npix = static_cast<std::size_t>(res) * res;
  const bool has_rgb = dL_drgb.size() > 0;
  const bool has_alpha = dL_dalpha.size() > 0;
  if (has_rgb && !dL_drgb.same_shape(output.rgb)) throw DimensionError("render_backward: rgb gradient shape mismatch");
  if (has_alpha && !dL_dalpha.same_shape(output.alpha))
    throw DimensionError("render_backward: alpha gradient shape mismatch");

  const auto nf = T.faces.rows();
  const auto nv = T.vertices.rows();
  std::vector<Vec2> g_screen(static_cast<std::size_t>(nv), Vec2::Zero());
  std::vector<double> g_depth(static_cast<std::size_t>(nv), 0.0);
  std::vector<double> g_shade(static_cast<std::size_t>(nf), 0.0);

  const double inv_sigma2 = 1.0 / (T.sigma * T.sigma);
  const double inv_gamma = 1.0 / T.params.gamma;
  const double dzn_ddepth = -1.0 / (T.params.far - T.params.near);
  std::vector<double> prefix, suffix;

  for (std::size_t p = 0; p < npix; ++p) {
    const int b = T.offset[p], e = T.offset[p + 1];
    if (b == e) continue;
    double g_color = 0.0;
    if (has_rgb) g_color = dL_drgb.data[p] + dL_drgb.data[npix + p] + dL_drgb.data[2 * npix + p];
    const double g_alpha_in = has_alpha ? dL_dalpha.data[p] : 0.0;
    if (g_color == 0.0 && g_alpha_in == 0.0) continue;

    const double alpha = output.alpha.data[p];
    const double surface = T.surface[p];
    // color = alpha * surface + 1 - alpha
    const double g_alpha = g_alpha_in + g_color * (surface - 1.0);
    const double g_surface = g_color * alpha;

    // prod_{k != j} (1 - D_k) via prefix/suffix products
    const int n = e - b;
    prefix.assign(static_cast<std::size_t>(n) + 1, 1.0);
    suffix.assign(static_cast<std::size_t>(n) + 1, 1.0);
    for (int k = 0; k < n; ++k) prefix[k + 1] = prefix[k] * (1.0 - T.frag_cov[b + k]);
    for (int k = n - 1; k >= 0; --k) suffix[k] = suffix[k + 1] * (1.0 - T.frag_cov[b + k]);

    const int x = static_cast<int>(p % res), y = static_cast<int>(p / res);
    const Vec2 pc = pixel_center(x, y, res);
    const double wsum = T.weight_sum[p];
    for (int k = 0; k < n; ++k) {
      const int slot = b + k;
      const int f = T.frag_face[slot];
      const double cov = T.frag_cov[slot];
      const double expo = std::exp((T.frag_zn[slot] - T.zmax[p]) * inv_gamma);
      const double w = cov * expo;
      const double shade = T.shade[f];

      double g_cov = g_alpha * prefix[k] * suffix[k + 1];
      double g_zn = 0.0;
      if (wsum > 0.0) {
        const double g_w = g_surface * (shade - surface) / wsum;
        g_cov += g_w * expo;
        g_zn = g_w * w * inv_gamma;
        g_shade[f] += g_surface * w / wsum;
      }
      if (g_cov == 0.0 && g_zn == 0.0) continue;

      const int idx[3] = {T.faces(f, 0), T.faces(f, 1), T.faces(f, 2)};
      const Vec2 a[3] = {T.screen[idx[0]], T.screen[idx[1]], T.screen[idx[2]]};
      if (g_cov != 0.0) {
        const SignedDistance sd = signed_distance(pc, a);
        // D = sigmoid(sign(d) d^2 / s^2) -> dD/dd = D (1 - D) 2 |d| / s^2
        const double dcov_dd = cov * (1.0 - cov) * 2.0 * std::abs(sd.value) * inv_sigma2;
        for (int c = 0; c < 3; ++c) g_screen[idx[c]] += g_cov * dcov_dd * sd.grad[c];
      }
      if (g_zn != 0.0) {
        double zk[3];
        for (int c = 0; c < 3; ++c) zk[c] = normalized_depth(T.depth[idx[c]], T.params);
        const Interp it = interpolate(pc, a, zk);
        for (int c = 0; c < 3; ++c) {
          g_screen[idx[c]] += g_zn * it.grad[c];
          g_depth[idx[c]] += g_zn * it.bary[c] * dzn_ddepth;
        }
      }
    }
  }

  VertexArray grad = VertexArray::Zero(nv, 3);
  // shading: shade = 0.5 + 0.5 n.l / |n|, n = (p1 - p0) x (p2 - p0)
  const Vec3 light = T.camera.headlight();
  for (Eigen::Index f = 0; f < nf; ++f) {
    if (!T.drawn[f] || g_shade[f] == 0.0) continue;
    const Vec3& n = T.normal[f];
    const double nn = n.norm();
    const Vec3 nhat = n / nn;
    const Vec3 g_n = g_shade[f] * 0.5 * (light - nhat.dot(light) * nhat) / nn;
    const Vec3 p0 = T.vertices.row(T.faces(f, 0)).transpose();
    const Vec3 e1 = T.vertices.row(T.faces(f, 1)).transpose() - p0;
    const Vec3 e2 = T.vertices.row(T.faces(f, 2)).transpose() - p0;
    const Vec3 g_e1 = e2.cross(g_n);
    const Vec3 g_e2 = g_n.cross(e1);
    grad.row(T.faces(f, 1)) += g_e1.transpose();
    grad.row(T.faces(f, 2)) += g_e2.transpose();
    grad.row(T.faces(f, 0)) -= (g_e1 + g_e2).transpose();
  }

  // projection: s = (qx, qy) / (qz tan), depth = qz
  const double t = T.camera.tan_half_fov();
  const Mat3& R = T.camera.view_rotation();
  for (Eigen::Index i = 0; i < nv; ++i) {
    if (g_screen[i].isZero(0.0) && g_depth[i] == 0.0) continue;
    const double qz = T.depth[i];
    const Vec2& s = T.screen[i];
    const Vec3 g_q(g_screen[i].x() / (qz * t), g_screen[i].y() / (qz * t),
                   -(g_screen[i].x() * s.x() + g_screen[i].y() * s.y()) / qz + g_depth[i]);
    grad.row(i) += (R.transpose() * g_q).transpose();
  }
  return grad;
}

Image hard_silhouette(const Image& alpha) {
  Image out(alpha.channels, alpha.height, alpha.width);
  for (std::size_t i = 0; i < alpha.size(); ++i) out.data[i] = alpha.data[i] > 0.5 ? 1.0 : 0.0;
  return out;
}

double silhouette_iou(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("silhouette_iou: shape mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a.data[i] > 0.5, y = b.data[i] > 0.5;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace meshstyle
