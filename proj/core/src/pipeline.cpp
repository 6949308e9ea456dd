#include "meshstyle/pipeline.hpp"

#include "meshstyle/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace meshstyle {

double lambda6_schedule(long t, long n1, double lambda6) {
  if (t < 0 || t > n1) throw ValidationError("lambda6_schedule: iteration " + std::to_string(t) +
                                             " outside [0, " + std::to_string(n1) + "]");
  if (n1 == 0) return lambda6;
  if (t == n1) return 0.01 * lambda6;  // closed form at the end point, free of cancellation
  return lambda6 * (1.0 - 0.99 * static_cast<double>(t) / static_cast<double>(n1));
}

void mask_gradients(JacobianField& dJ, const std::vector<int>& face_labels, const std::vector<int>& selection,
                    int num_parts) {
  if (selection.empty()) throw ValidationError("part selection is empty");
  if (dJ.size() != face_labels.size()) throw DimensionError("mask_gradients: face count mismatch");
  std::vector<char> keep(static_cast<std::size_t>(num_parts) + 1, 0);
  for (int p : selection) {
    if (p < 1 || p > num_parts)
      throw ValidationError("unknown part id " + std::to_string(p) + " (mesh has " + std::to_string(num_parts) +
                            " parts)");
    keep[p] = 1;
  }
  for (std::size_t f = 0; f < dJ.size(); ++f)
    if (!keep[face_labels[f]]) dJ[f].setZero();
}

std::vector<CageTransform> OptimState::transforms() const {
  std::vector<CageTransform> out;
  out.reserve(cages.size());
  for (const auto& c : cages) out.push_back(c.transform());
  return out;
}

std::string loss_csv_header() {
  return "iteration,stage,lambda6,sds_aux,sym_aux,sds,reg,sym,cage,total";
}

std::string loss_csv_row(const LossTerms& t) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%ld,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", t.iteration, t.stage.c_str(),
                t.lambda6, t.w_sds_aux * t.sds_aux, t.w_sym_aux * t.sym_aux, t.w_sds * t.sds, t.w_reg * t.reg,
                t.w_sym * t.sym, t.lambda6 * t.cage, t.total());
  return buf;
}

namespace {

// d/dq of g . (R(q/|q|) v), quaternion as (w, x, y, z).
Eigen::Vector4d rotation_gradient(const Eigen::Quaterniond& q, const Vec3& v, const Vec3& g) {
  const double norm = q.norm();
  const Eigen::Quaterniond qn = q.normalized();
  const double w = qn.w();
  const Vec3 u = qn.vec();
  // R v = v + 2w (u x v) + 2u (u.v) - 2v (u.u) on the unit sphere
  Eigen::Vector4d d;
  d[0] = 2.0 * g.dot(u.cross(v));
  d.tail<3>() = 2.0 * w * v.cross(g) + 2.0 * u.dot(v) * g + 2.0 * g.dot(u) * v - 4.0 * g.dot(v) * u;
  const Eigen::Vector4d qv(qn.w(), qn.x(), qn.y(), qn.z());
  return (d - qv * qv.dot(d)) / norm;
}

std::vector<RenderOutput> render_views(const VertexArray& V, const FaceArray& F, const std::vector<Camera>& cams,
                                       const SoftRasterParams& params, int threads) {
  std::vector<RenderOutput> out(cams.size());
  if (threads <= 1 || cams.size() < 2) {
    for (std::size_t v = 0; v < cams.size(); ++v) out[v] = render_soft(V, F, cams[v], params);
    return out;
  }
  std::vector<std::exception_ptr> errors(cams.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t v = 0; v < cams.size(); ++v)
      pool.emplace_back([&, v] {
        try {
          out[v] = render_soft(V, F, cams[v], params);
        } catch (...) {
          errors[v] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void check_finite(const LossTerms& t) {
  const double vals[] = {t.sds_aux, t.sym_aux, t.sds, t.reg, t.sym, t.cage};
  for (double v : vals)
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << t.iteration << " (" << t.stage << "): sds_aux=" << t.sds_aux
         << " sym_aux=" << t.sym_aux << " sds=" << t.sds << " reg=" << t.reg << " sym=" << t.sym
         << " cage=" << t.cage;
      throw NumericError(os.str());
    }
}

}  // namespace

Stylizer::Stylizer(Mesh mesh, PartSet parts, ScheduleConfig config, std::shared_ptr<GuidanceProvider> provider,
                   std::optional<EncoderMap> encoder)
    : mesh_(std::move(mesh)), parts_(std::move(parts)), config_(std::move(config)), provider_(std::move(provider)) {
  config_.validate();
  if (!provider_) throw ConfigError("no guidance provider");
  if (parts_.num_vertices() != mesh_.num_vertices())
    throw DimensionError("part labels cover " + std::to_string(parts_.num_vertices()) + " vertices, mesh has " +
                         std::to_string(mesh_.num_vertices()));
  for (int p : config_.parts_select)
    if (p > parts_.num_parts())
      throw ConfigError("parts_select: unknown part id " + std::to_string(p) + " (mesh has " +
                        std::to_string(parts_.num_parts()) + " parts)");

  const int res = config_.camera.resolution;
  if (encoder) {
    encoder_ = *encoder;
    if (encoder_.image_height != res || encoder_.image_width != res)
      throw ConfigError("encoder map expects " + std::to_string(encoder_.image_height) + "x" +
                        std::to_string(encoder_.image_width) + " renders, camera.resolution is " +
                        std::to_string(res));
  } else if (res % 8 == 0) {
    encoder_ = EncoderMap::passthrough(res, res);
  } else if (provider_->domain() == GuidanceDomain::Latent) {
    throw ConfigError("latent guidance needs camera.resolution divisible by 8");
  }

  fact_ = std::make_unique<PoissonFactorization>(mesh_);
  face_labels_ = parts_.face_labels(mesh_.faces());

  // Auxiliary spheres at farthest-point samples; each inherits its vertex's part.
  const int k = std::min(config_.aux.centers, mesh_.num_vertices());
  const std::vector<int> samples = farthest_point_sample(mesh_, k, 0);
  VertexArray centers(k, 3);
  for (int i = 0; i < k; ++i) {
    centers.row(i) = mesh_.vertices().row(samples[i]);
    center_part_.push_back(parts_.label(samples[i]));
  }
  const double radius = config_.aux.radius > 0.0 ? config_.aux.radius : default_sphere_radius(centers);
  aux_ = build_sphere_aux_mesh(centers, radius, config_.aux.subdivisions);
  aux_vertex_part_.resize(aux_.owner.size());
  for (std::size_t i = 0; i < aux_.owner.size(); ++i) aux_vertex_part_[i] = center_part_[aux_.owner[i]];

  const double floor = 1e-4 * mesh_.bbox_diagonal();
  for (int l = 1; l <= parts_.num_parts(); ++l) boxes_.push_back(fit_obb(mesh_.vertices(), parts_.members(l), floor));
  // Coefficients of the reconstructed rest shape, so J = I with identity
  // cages is an exact zero of the cage loss.
  rest_coeffs_ = rest_cage_coefficients(parts_, boxes_, fact_->solve(init_identity(mesh_)));

  if (config_.symmetry == SymmetryMode::Auto) {
    target_planes_ = detect_symmetry(mesh_.vertices()).planes;
    if (centers.rows() >= 3) aux_planes_ = detect_symmetry(centers).planes;
  }

  state_.jacobians = init_identity(mesh_);
  state_.jacobian_opt = Adam(9 * static_cast<std::size_t>(mesh_.num_faces()), {config_.lr.jacobian});
  state_.cages.assign(static_cast<std::size_t>(parts_.num_parts()), CageParams{});
  for (int l = 0; l < parts_.num_parts(); ++l)
    state_.cage_opt.push_back({Adam(1, {config_.lr.scale}), Adam(4, {config_.lr.rotation}),
                               Adam(3, {config_.lr.translation})});
  state_.rng.seed(config_.seed);
}

VertexArray Stylizer::deformed_vertices() const { return fact_->solve(state_.jacobians); }

VertexArray Stylizer::aux_vertices() const {
  const auto xf = state_.transforms();
  const VertexArray& rest = aux_.mesh.vertices();
  VertexArray out(rest.rows(), 3);
  for (Eigen::Index i = 0; i < rest.rows(); ++i)
    out.row(i) = xf[aux_vertex_part_[i] - 1].apply(rest.row(i).transpose()).transpose();
  return out;
}

VertexArray Stylizer::aux_centers() const {
  const auto xf = state_.transforms();
  VertexArray out(aux_.centers.rows(), 3);
  for (Eigen::Index i = 0; i < aux_.centers.rows(); ++i)
    out.row(i) = xf[center_part_[i] - 1].apply(aux_.centers.row(i).transpose()).transpose();
  return out;
}

std::vector<OBBCage> Stylizer::current_boxes() const {
  const auto xf = state_.transforms();
  std::vector<OBBCage> out;
  for (std::size_t l = 0; l < boxes_.size(); ++l) out.push_back(apply_cage_transform(boxes_[l], xf[l]));
  return out;
}

double Stylizer::cage_loss_value() const {
  return cage_loss(parts_, rest_coeffs_, current_boxes(), deformed_vertices()).value;
}

double Stylizer::aux_symmetry_value() const { return symmetry_loss(aux_centers(), aux_planes_).value(); }

VertexArray Stylizer::guidance_gradient(const VertexArray& V, const FaceArray& F, bool auxiliary, double& loss) {
  const int threads = config_.deterministic ? 1 : config_.threads;
  GuidanceBatch batch;
  for (int b = 0; b < config_.batch_size; ++b) batch.cameras.push_back(sample_camera(state_.rng, config_.camera));
  batch.seed = state_.rng();
  batch.iteration = state_.iteration + 1;
  batch.auxiliary = auxiliary;
  batch.renders = render_views(V, F, batch.cameras, config_.raster, threads);
  const bool latent = provider_->domain() == GuidanceDomain::Latent;
  if (latent)
    for (const auto& r : batch.renders) batch.latents.push_back(encode_approx(r.rgb, encoder_));

  const GuidanceGradient g = provider_->guide(batch);
  const std::size_t n = batch.renders.size();
  if (latent ? g.grad_latent.size() != n : (g.grad_alpha.size() != n || g.grad_rgb.size() != n))
    throw ProviderError("provider '" + g.provider + "' returned a gradient batch of the wrong size", false);

  VertexArray grad = VertexArray::Zero(V.rows(), 3);
  for (std::size_t v = 0; v < n; ++v) {
    if (latent)
      grad += render_backward(batch.renders[v], encode_backward(g.grad_latent[v], encoder_), Image{});
    else
      grad += render_backward(batch.renders[v], g.grad_rgb[v], g.grad_alpha[v]);
  }
  grad /= static_cast<double>(n);
  if (!grad.allFinite()) throw NumericError("guidance produced a non-finite vertex gradient");
  loss = g.loss;
  return grad;
}

CageObjective Stylizer::cage_objective() {
  CageObjective out;
  LossTerms& terms = out.terms;
  terms.iteration = state_.iteration + 1;
  terms.stage = "coarse";
  terms.w_sds_aux = config_.weights.sds_aux;
  terms.w_sym_aux = config_.weights.sym_aux;

  const VertexArray aux_v = aux_vertices();
  const VertexArray& rest_aux = aux_.mesh.vertices();
  const auto xf = state_.transforms();
  const int L = parts_.num_parts();
  out.log_scale.assign(static_cast<std::size_t>(L), 0.0);
  out.rotation.assign(static_cast<std::size_t>(L), Eigen::Vector4d::Zero());
  out.translation.assign(static_cast<std::size_t>(L), Vec3::Zero());
  std::vector<Mat3> rot(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) rot[l] = xf[l].rotation_matrix();

  // p' = s R p + T for every rest point p of part l
  auto accumulate = [&](int part, const Vec3& p, const Vec3& g) {
    const int l = part - 1;
    const Vec3 rp = rot[l] * p;
    out.translation[l] += g;
    out.log_scale[l] += xf[l].scale * g.dot(rp);
    out.rotation[l] += xf[l].scale * rotation_gradient(state_.cages[l].rotation, p, g);
  };

  if (config_.weights.sds_aux != 0.0) {
    const VertexArray g = guidance_gradient(aux_v, aux_.mesh.faces(), true, terms.sds_aux);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      if (!g.row(i).isZero(0.0))
        accumulate(aux_vertex_part_[i], rest_aux.row(i).transpose(), config_.weights.sds_aux * g.row(i).transpose());
  }
  if (config_.weights.sym_aux != 0.0 && !aux_planes_.empty()) {
    const SymmetryLoss sl = symmetry_loss(aux_centers(), aux_planes_);
    terms.sym_aux = sl.value();
    for (Eigen::Index i = 0; i < sl.gradient.rows(); ++i)
      accumulate(center_part_[i], aux_.centers.row(i).transpose(), config_.weights.sym_aux * sl.gradient.row(i).transpose());
  }
  check_finite(terms);
  return out;
}

LossTerms Stylizer::coarse_step() {
  CageObjective obj = cage_objective();
  for (std::size_t l = 0; l < state_.cages.size(); ++l) {
    auto& c = state_.cages[l];
    auto& opt = state_.cage_opt[l];
    double s = c.log_scale;
    opt.scale.step(std::span<double>(&s, 1), std::span<const double>(&obj.log_scale[l], 1));
    c.log_scale = s;
    Eigen::Vector4d q(c.rotation.w(), c.rotation.x(), c.rotation.y(), c.rotation.z());
    opt.rotation.step(std::span<double>(q.data(), 4), std::span<const double>(obj.rotation[l].data(), 4));
    c.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
    opt.translation.step(std::span<double>(c.translation.data(), 3),
                         std::span<const double>(obj.translation[l].data(), 3));
  }
  ++state_.cage_steps;
  return obj.terms;
}

LossTerms Stylizer::target_step(long t) {
  if (t <= 0 || t > config_.n1)
    throw ValidationError("target_step: iteration " + std::to_string(t) + " outside (0, n1]");
  return jacobian_step(t, lambda6_schedule(t, config_.n1, config_.weights.cage), "coarse");
}

LossTerms Stylizer::fine_step(long t) {
  if (t <= config_.n1 || t > config_.n2)
    throw ValidationError("fine_step: iteration " + std::to_string(t) + " outside (n1, n2]");
  return jacobian_step(t, 0.0, "fine");
}

JacobianObjective Stylizer::jacobian_objective(double cage_weight) {
  JacobianObjective out;
  LossTerms& terms = out.terms;
  terms.iteration = state_.iteration + 1;
  terms.w_sds = config_.weights.sds;
  terms.w_reg = config_.weights.reg;
  terms.w_sym = config_.weights.sym;
  terms.cage_term = cage_weight != 0.0;
  terms.lambda6 = cage_weight;

  const VertexArray V = deformed_vertices();
  VertexArray dV = VertexArray::Zero(V.rows(), 3);

  if (config_.weights.sds != 0.0) dV += config_.weights.sds * guidance_gradient(V, mesh_.faces(), false, terms.sds);
  if (config_.weights.sym != 0.0 && !target_planes_.empty()) {
    const SymmetryLoss sl = symmetry_loss(V, target_planes_);
    terms.sym = sl.value();
    dV += config_.weights.sym * sl.gradient;
  }
  if (terms.cage_term) {
    const CageLoss cl = cage_loss(parts_, rest_coeffs_, current_boxes(), V);
    terms.cage = cl.value;
    dV += cage_weight * cl.gradient;
  }

  out.gradient = dV.isZero(0.0) ? JacobianField(state_.jacobians.size(), Mat3::Zero()) : fact_->adjoint(dV);
  const JacobianLoss reg = identity_reg(state_.jacobians, mesh_.face_areas());
  terms.reg = reg.value;
  if (config_.weights.reg != 0.0)
    for (std::size_t f = 0; f < out.gradient.size(); ++f) out.gradient[f] += config_.weights.reg * reg.gradient[f];
  check_finite(terms);
  return out;
}

LossTerms Stylizer::jacobian_step(long t, double cage_weight, const char* stage) {
  JacobianObjective obj = jacobian_objective(cage_weight);
  obj.terms.iteration = t;
  obj.terms.stage = stage;
  JacobianField& dJ = obj.gradient;
  if (!config_.parts_select.empty()) mask_gradients(dJ, face_labels_, config_.parts_select, parts_.num_parts());

  const std::size_t n = dJ.size();
  std::vector<double> params(9 * n), grads(9 * n);
  for (std::size_t f = 0; f < n; ++f) {
    Eigen::Map<Mat3>(params.data() + 9 * f) = state_.jacobians[f];
    Eigen::Map<Mat3>(grads.data() + 9 * f) = dJ[f];
  }
  state_.jacobian_opt.step(params, grads);
  for (std::size_t f = 0; f < n; ++f) state_.jacobians[f] = Eigen::Map<const Mat3>(params.data() + 9 * f);
  ++state_.jacobian_steps;
  state_.iteration = t;
  return obj.terms;
}

namespace {

void write_checkpoint(const Stylizer& s, const std::filesystem::path& dir, long iteration, const LossTerms* last) {
  char name[64];
  std::snprintf(name, sizeof name, "ckpt_%06ld", iteration);
  save_obj(dir / (std::string(name) + ".obj"), s.deformed_vertices(), s.mesh().faces());
  nlohmann::json j;
  j["iteration"] = iteration;
  j["cage_steps"] = s.state().cage_steps;
  j["jacobian_steps"] = s.state().jacobian_steps;
  j["seed"] = s.config().seed;
  nlohmann::json cages = nlohmann::json::array();
  for (const auto& c : s.state().cages) {
    const CageTransform x = c.transform();
    cages.push_back({{"scale", x.scale},
                     {"rotation_wxyz", {x.rotation.w(), x.rotation.x(), x.rotation.y(), x.rotation.z()}},
                     {"translation", {x.translation.x(), x.translation.y(), x.translation.z()}}});
  }
  j["cages"] = cages;
  if (last) {
    j["stage"] = last->stage;
    j["lambda6"] = last->lambda6;
    j["loss_total"] = last->total();
  }
  std::ofstream out(dir / (std::string(name) + ".json"));
  if (!out) throw IoError("cannot write checkpoint sidecar in " + dir.string());
  out << j.dump(2) << '\n';
}

}  // namespace

RunResult run(Stylizer& s, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const ScheduleConfig& cfg = s.config();
  const bool files = !options.out_dir.empty();
  if (files) std::filesystem::create_directories(options.out_dir);

  RunResult result;
  std::ofstream report;
  if (files) {
    report.open(options.out_dir / "report.csv");
    if (!report) throw IoError("cannot write report in " + options.out_dir.string());
    report << loss_csv_header() << '\n';
  }
  auto record = [&](const LossTerms& t) {
    result.curve.push_back(t);
    if (files) report << loss_csv_row(t) << '\n';
    if (options.on_iteration) options.on_iteration(t);
    if (files && options.write_checkpoints && cfg.checkpoint_interval > 0 && t.iteration % cfg.checkpoint_interval == 0)
      write_checkpoint(s, options.out_dir, t.iteration, &t);
  };

  try {
    for (long t = 1; t <= cfg.n1; ++t) {
      const LossTerms coarse = s.coarse_step();
      LossTerms row = s.target_step(t);
      row.sds_aux = coarse.sds_aux;
      row.sym_aux = coarse.sym_aux;
      row.w_sds_aux = coarse.w_sds_aux;
      row.w_sym_aux = coarse.w_sym_aux;
      record(row);
    }
    for (long t = cfg.n1 + 1; t <= cfg.n2; ++t) record(s.fine_step(t));
  } catch (...) {
    if (files) {
      report.flush();
      try {
        write_checkpoint(s, options.out_dir, s.state().iteration, result.curve.empty() ? nullptr : &result.curve.back());
      } catch (...) {
      }
    }
    throw;
  }

  result.vertices = s.state().jacobian_steps == 0 ? s.mesh().vertices() : s.deformed_vertices();
  if (files) save_obj(options.out_dir / "final.obj", result.vertices, s.mesh().faces());
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace meshstyle
