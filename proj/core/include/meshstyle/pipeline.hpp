#pragma once

#include "meshstyle/cage.hpp"
#include "meshstyle/config.hpp"
#include "meshstyle/encoder.hpp"
#include "meshstyle/guidance.hpp"
#include "meshstyle/jacobian.hpp"
#include "meshstyle/optimizer.hpp"
#include "meshstyle/parts.hpp"
#include "meshstyle/sampling.hpp"
#include "meshstyle/symmetry.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace meshstyle {

/// lambda6 * (1 - 0.99 t / n1) for t in [0, n1]. With n1 == 0 only t == 0
/// is valid and yields lambda6.
double lambda6_schedule(long t, long n1, double lambda6);

/// Zeroes the gradient of every face whose majority part is not selected.
/// Throws ValidationError for an empty selection or an unknown part id.
void mask_gradients(JacobianField& dJ, const std::vector<int>& face_labels, const std::vector<int>& selection,
                    int num_parts);

/// Optimizer-side parameters of one part's cage similarity.
struct CageParams {
  double log_scale = 0.0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  CageTransform transform() const { return {std::exp(log_scale), rotation.normalized(), translation}; }
};

struct CageOptimizer {
  Adam scale, rotation, translation;
};

struct OptimState {
  JacobianField jacobians;
  std::vector<CageParams> cages;  // index l-1 for part l
  Adam jacobian_opt;
  std::vector<CageOptimizer> cage_opt;
  long iteration = 0;  // last completed iteration
  long cage_steps = 0;
  long jacobian_steps = 0;
  std::mt19937_64 rng;

  std::vector<CageTransform> transforms() const;
};

/// Unweighted loss terms of one iteration plus the weights applied.
struct LossTerms {
  long iteration = 0;
  std::string stage;
  double sds_aux = 0, sym_aux = 0, sds = 0, reg = 0, sym = 0, cage = 0;
  double w_sds_aux = 0, w_sym_aux = 0, w_sds = 0, w_reg = 0, w_sym = 0, lambda6 = 0;
  bool cage_term = false;

  double total() const {
    return w_sds_aux * sds_aux + w_sym_aux * sym_aux + w_sds * sds + w_reg * reg + w_sym * sym + lambda6 * cage;
  }
};

/// Loss terms and the gradient with respect to the per-face Jacobians,
/// before part masking.
struct JacobianObjective {
  LossTerms terms;
  JacobianField gradient;
};

/// Loss terms and the gradient with respect to each part's cage parameters.
struct CageObjective {
  LossTerms terms;
  std::vector<double> log_scale;
  std::vector<Eigen::Vector4d> rotation;  // (w, x, y, z)
  std::vector<Vec3> translation;
};

std::string loss_csv_header();
std::string loss_csv_row(const LossTerms& terms);

/// Coarse-to-fine stylization engine over one target mesh.
///
/// Construction precomputes the Poisson factorization, the sphere auxiliary
/// mesh (farthest-point centers), per-part OBB cages with rest coefficients,
/// and (with symmetry on) the symmetry planes of the target vertices and of
/// the auxiliary sphere centers.
class Stylizer {
 public:
  Stylizer(Mesh mesh, PartSet parts, ScheduleConfig config, std::shared_ptr<GuidanceProvider> provider,
           std::optional<EncoderMap> encoder = std::nullopt);

  const Mesh& mesh() const noexcept { return mesh_; }
  const PartSet& parts() const noexcept { return parts_; }
  const ScheduleConfig& config() const noexcept { return config_; }
  ScheduleConfig& mutable_config() noexcept { return config_; }
  const PoissonFactorization& factorization() const noexcept { return *fact_; }
  const SphereAuxMesh& aux() const noexcept { return aux_; }
  const std::vector<int>& aux_center_parts() const noexcept { return center_part_; }
  const std::vector<OBBCage>& part_boxes() const noexcept { return boxes_; }
  const std::vector<CageCoefficients>& rest_coefficients() const noexcept { return rest_coeffs_; }
  const std::vector<SymmetryPlane>& target_planes() const noexcept { return target_planes_; }
  const std::vector<SymmetryPlane>& aux_planes() const noexcept { return aux_planes_; }
  const std::vector<int>& face_labels() const noexcept { return face_labels_; }
  const EncoderMap& encoder() const noexcept { return encoder_; }

  OptimState& state() noexcept { return state_; }
  const OptimState& state() const noexcept { return state_; }

  void set_target_planes(std::vector<SymmetryPlane> planes) { target_planes_ = std::move(planes); }
  void set_aux_planes(std::vector<SymmetryPlane> planes) { aux_planes_ = std::move(planes); }

  /// One cage update: guidance on the transformed auxiliary mesh plus the
  /// auxiliary symmetry loss, then one Adam step on every part's (s, R, T).
  LossTerms coarse_step();
  /// One Jacobian update with the decaying cage weight lambda6(t), t in (0, n1].
  LossTerms target_step(long t);
  /// One Jacobian update without the cage term, t in (n1, n2].
  LossTerms fine_step(long t);

  VertexArray deformed_vertices() const;
  VertexArray aux_vertices() const;
  VertexArray aux_centers() const;
  std::vector<OBBCage> current_boxes() const;

  /// Objective of one Jacobian step at the current state. The cage term is
  /// included only when cage_weight is non-zero. Draws cameras from the
  /// state's random stream exactly as a step would.
  JacobianObjective jacobian_objective(double cage_weight);
  /// Objective of one cage step at the current state.
  CageObjective cage_objective();

  // Loss value of the current state without stepping (used by tests).
  double cage_loss_value() const;
  double aux_symmetry_value() const;

 private:
  LossTerms jacobian_step(long t, double cage_weight, const char* stage);
  VertexArray guidance_gradient(const VertexArray& vertices, const FaceArray& faces, bool auxiliary,
                                double& loss);

  Mesh mesh_;
  PartSet parts_;
  ScheduleConfig config_;
  std::shared_ptr<GuidanceProvider> provider_;
  EncoderMap encoder_;
  std::unique_ptr<PoissonFactorization> fact_;
  SphereAuxMesh aux_;
  std::vector<int> center_part_;  // 1-based part per aux center
  std::vector<int> aux_vertex_part_;
  std::vector<OBBCage> boxes_;
  std::vector<CageCoefficients> rest_coeffs_;
  std::vector<SymmetryPlane> target_planes_, aux_planes_;
  std::vector<int> face_labels_;
  OptimState state_;
};

struct RunOptions {
  // Empty: no files are written.
  std::filesystem::path out_dir;
  bool write_checkpoints = true;
  // Called after every iteration.
  std::function<void(const LossTerms&)> on_iteration;
};

struct RunResult {
  VertexArray vertices;
  std::vector<LossTerms> curve;
  double seconds = 0.0;
};

/// Coarse stage (cage step then Jacobian step with lambda6(t), t = 1..n1)
/// followed by the fine stage (t = n1+1..n2). With an output directory it
/// writes ckpt_%06d.obj/.json every checkpoint_interval iterations,
/// report.csv and final.obj. On failure the current state is checkpointed
/// before the error propagates.
RunResult run(Stylizer& stylizer, const RunOptions& options = {});

}  // namespace meshstyle
