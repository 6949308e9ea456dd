#pragma once

#include "meshstyle/camera.hpp"
#include "meshstyle/renderer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace meshstyle {

struct LossWeights {
  double sds_aux = 1.0;     // lambda1
  double sym_aux = 50.0;    // lambda2
  double sds = 1.0;         // lambda3
  double reg = 0.5;         // lambda4
  double sym = 50.0;        // lambda5
  double cage = 1000.0;     // lambda6 (initial value of the decaying weight)
};

struct LearningRates {
  double jacobian = 1e-3;
  double translation = 1e-2;
  double scale = 5e-3;  // applied to log-scale
  double rotation = 5e-3;
};

struct AuxConfig {
  int centers = 256;
  double radius = 0.0;  // <= 0: 0.5 x median nearest-neighbour distance
  int subdivisions = 1;
};

enum class SymmetryMode { Auto, Off };

struct ProviderConfig {
  std::string kind = "silhouette";  // silhouette | latent-target | sds
  std::string endpoint = "http://127.0.0.1:8000";
  std::string prompt = "A TOK style sculpture";
  std::string lora_id;
  double t_min = 0.02;
  double t_max = 0.98;
  double cfg_scale = 100.0;
  int retries = 3;
  double timeout_s = 120.0;
};

/// Everything that steers one stylization run. Mirrors the JSON config
/// keys one-to-one (see README for the key list).
struct ScheduleConfig {
  LossWeights weights;
  long n1 = 300;  // coarse stage length
  long n2 = 600;  // total iterations (coarse + fine)
  LearningRates lr;
  int batch_size = 4;
  CameraSamplingConfig camera;
  SoftRasterParams raster;
  AuxConfig aux;
  SymmetryMode symmetry = SymmetryMode::Auto;
  std::vector<int> parts_select;  // empty: all parts
  ProviderConfig provider;
  std::uint64_t seed = 0;
  bool deterministic = true;
  int threads = 1;
  long checkpoint_interval = 100;

  // The paper-scale production schedule (1800 coarse / 3600 total).
  static ScheduleConfig production();

  // Throws ConfigError naming the first offending key.
  void validate() const;
};

ScheduleConfig load_config(const std::filesystem::path& path);
ScheduleConfig parse_config(const std::string& json_text);
// Overlays keys present in json_text onto `base`.
ScheduleConfig parse_config(const std::string& json_text, ScheduleConfig base);
std::string config_to_json(const ScheduleConfig& config, int indent = 2);

}  // namespace meshstyle
