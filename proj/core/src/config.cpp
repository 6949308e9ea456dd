#include "meshstyle/config.hpp"

#include "meshstyle/error.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace meshstyle {

using nlohmann::json;

ScheduleConfig ScheduleConfig::production() {
  ScheduleConfig c;
  c.n1 = 1800;
  c.n2 = 3600;
  return c;
}

void ScheduleConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  const double w[] = {weights.sds_aux, weights.sym_aux, weights.sds, weights.reg, weights.sym, weights.cage};
  for (double x : w)
    if (!(x >= 0.0)) fail("weights: every lambda must be non-negative");
  if (n1 < 0 || n2 < n1) fail("stages: need 0 <= n1 <= n2");
  if (!(lr.jacobian > 0 && lr.translation > 0 && lr.scale > 0 && lr.rotation > 0))
    fail("learning_rates: every rate must be positive");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(camera.fov_deg > 0 && camera.fov_deg < 180)) fail("camera.fov must lie in (0, 180)");
  if (!(camera.distance > 0)) fail("camera.distance must be positive");
  if (camera.resolution < 16) fail("camera.resolution must be >= 16");
  if (camera.elevation_min_deg > camera.elevation_max_deg) fail("camera: elevation_min > elevation_max");
  if (!(raster.gamma > 0)) fail("raster.gamma must be positive");
  if (!(raster.far > raster.near && raster.near > 0)) fail("raster: need 0 < near < far");
  if (aux.centers < 1) fail("aux.centers must be >= 1");
  if (aux.subdivisions < 0) fail("aux.subdivisions must be >= 0");
  std::set<int> seen;
  for (int p : parts_select) {
    if (p < 1) fail("parts_select: part ids are 1-based");
    if (!seen.insert(p).second) fail("parts_select: duplicate part id");
  }
  if (provider.kind != "silhouette" && provider.kind != "latent-target" && provider.kind != "sds")
    fail("provider.kind must be silhouette, latent-target or sds");
  if (!(0.0 < provider.t_min && provider.t_min < provider.t_max && provider.t_max < 1.0))
    fail("provider: need 0 < t_min < t_max < 1");
  if (provider.retries < 0) fail("provider.retries must be >= 0");
  if (threads < 1) fail("threads must be >= 1");
  if (checkpoint_interval < 0) fail("checkpoint_interval must be >= 0");
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError("unknown config key '" + where + k + "'");
  }
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j[key].is_object()) throw ConfigError(std::string("config key '") + key + "' must be an object");
  return j[key];
}

}  // namespace

ScheduleConfig parse_config(const std::string& text, ScheduleConfig c) {
  const json j = json::parse(text, nullptr, false, true);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object");
  reject_unknown(j, {"weights", "stages", "learning_rates", "batch_size", "camera", "raster", "aux", "symmetry",
                     "parts_select", "provider", "seed", "deterministic", "threads", "checkpoint_interval"},
                 "");

  const json& w = section(j, "weights");
  reject_unknown(w, {"lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "lambda6"}, "weights.");
  read(w, "lambda1", c.weights.sds_aux, "weights.");
  read(w, "lambda2", c.weights.sym_aux, "weights.");
  read(w, "lambda3", c.weights.sds, "weights.");
  read(w, "lambda4", c.weights.reg, "weights.");
  read(w, "lambda5", c.weights.sym, "weights.");
  read(w, "lambda6", c.weights.cage, "weights.");

  const json& s = section(j, "stages");
  reject_unknown(s, {"n1", "n2"}, "stages.");
  read(s, "n1", c.n1, "stages.");
  read(s, "n2", c.n2, "stages.");

  const json& l = section(j, "learning_rates");
  reject_unknown(l, {"jacobian", "translation", "scale", "rotation"}, "learning_rates.");
  read(l, "jacobian", c.lr.jacobian, "learning_rates.");
  read(l, "translation", c.lr.translation, "learning_rates.");
  read(l, "scale", c.lr.scale, "learning_rates.");
  read(l, "rotation", c.lr.rotation, "learning_rates.");

  read(j, "batch_size", c.batch_size, "");

  const json& cam = section(j, "camera");
  reject_unknown(cam, {"fov", "distance", "elevation_min", "elevation_max", "azimuth_min", "azimuth_max",
                       "resolution"},
                 "camera.");
  read(cam, "fov", c.camera.fov_deg, "camera.");
  read(cam, "distance", c.camera.distance, "camera.");
  read(cam, "elevation_min", c.camera.elevation_min_deg, "camera.");
  read(cam, "elevation_max", c.camera.elevation_max_deg, "camera.");
  read(cam, "azimuth_min", c.camera.azimuth_min_deg, "camera.");
  read(cam, "azimuth_max", c.camera.azimuth_max_deg, "camera.");
  read(cam, "resolution", c.camera.resolution, "camera.");

  const json& r = section(j, "raster");
  reject_unknown(r, {"sigma_edge", "gamma", "near", "far", "cutoff"}, "raster.");
  read(r, "sigma_edge", c.raster.sigma_edge, "raster.");
  read(r, "gamma", c.raster.gamma, "raster.");
  read(r, "near", c.raster.near, "raster.");
  read(r, "far", c.raster.far, "raster.");
  read(r, "cutoff", c.raster.cutoff, "raster.");

  const json& a = section(j, "aux");
  reject_unknown(a, {"centers", "radius", "subdivisions"}, "aux.");
  read(a, "centers", c.aux.centers, "aux.");
  read(a, "radius", c.aux.radius, "aux.");
  read(a, "subdivisions", c.aux.subdivisions, "aux.");

  if (j.contains("symmetry")) {
    std::string mode;
    read(j, "symmetry", mode, "");
    if (mode == "auto")
      c.symmetry = SymmetryMode::Auto;
    else if (mode == "off")
      c.symmetry = SymmetryMode::Off;
    else
      throw ConfigError("config key 'symmetry' must be \"auto\" or \"off\"");
  }
  read(j, "parts_select", c.parts_select, "");

  const json& p = section(j, "provider");
  reject_unknown(p, {"kind", "endpoint", "prompt", "lora_id", "t_min", "t_max", "cfg_scale", "retries", "timeout_s"},
                 "provider.");
  read(p, "kind", c.provider.kind, "provider.");
  read(p, "endpoint", c.provider.endpoint, "provider.");
  read(p, "prompt", c.provider.prompt, "provider.");
  read(p, "lora_id", c.provider.lora_id, "provider.");
  read(p, "t_min", c.provider.t_min, "provider.");
  read(p, "t_max", c.provider.t_max, "provider.");
  read(p, "cfg_scale", c.provider.cfg_scale, "provider.");
  read(p, "retries", c.provider.retries, "provider.");
  read(p, "timeout_s", c.provider.timeout_s, "provider.");

  read(j, "seed", c.seed, "");
  read(j, "deterministic", c.deterministic, "");
  read(j, "threads", c.threads, "");
  read(j, "checkpoint_interval", c.checkpoint_interval, "");
  c.validate();
  return c;
}

ScheduleConfig parse_config(const std::string& text) { return parse_config(text, ScheduleConfig{}); }

ScheduleConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const ScheduleConfig& c, int indent) {
  json j;
  j["weights"] = {{"lambda1", c.weights.sds_aux}, {"lambda2", c.weights.sym_aux}, {"lambda3", c.weights.sds},
                  {"lambda4", c.weights.reg},     {"lambda5", c.weights.sym},     {"lambda6", c.weights.cage}};
  j["stages"] = {{"n1", c.n1}, {"n2", c.n2}};
  j["learning_rates"] = {{"jacobian", c.lr.jacobian},
                         {"translation", c.lr.translation},
                         {"scale", c.lr.scale},
                         {"rotation", c.lr.rotation}};
  j["batch_size"] = c.batch_size;
  j["camera"] = {{"fov", c.camera.fov_deg},
                 {"distance", c.camera.distance},
                 {"elevation_min", c.camera.elevation_min_deg},
                 {"elevation_max", c.camera.elevation_max_deg},
                 {"azimuth_min", c.camera.azimuth_min_deg},
                 {"azimuth_max", c.camera.azimuth_max_deg},
                 {"resolution", c.camera.resolution}};
  j["raster"] = {{"sigma_edge", c.raster.sigma_edge},
                 {"gamma", c.raster.gamma},
                 {"near", c.raster.near},
                 {"far", c.raster.far},
                 {"cutoff", c.raster.cutoff}};
  j["aux"] = {{"centers", c.aux.centers}, {"radius", c.aux.radius}, {"subdivisions", c.aux.subdivisions}};
  j["symmetry"] = c.symmetry == SymmetryMode::Auto ? "auto" : "off";
  j["parts_select"] = c.parts_select;
  j["provider"] = {{"kind", c.provider.kind},         {"endpoint", c.provider.endpoint},
                   {"prompt", c.provider.prompt},     {"lora_id", c.provider.lora_id},
                   {"t_min", c.provider.t_min},       {"t_max", c.provider.t_max},
                   {"cfg_scale", c.provider.cfg_scale}, {"retries", c.provider.retries},
                   {"timeout_s", c.provider.timeout_s}};
  j["seed"] = c.seed;
  j["deterministic"] = c.deterministic;
  j["threads"] = c.threads;
  j["checkpoint_interval"] = c.checkpoint_interval;
  return j.dump(indent);
}

}  // namespace meshstyle
