// meshstyle command-line tool.
//
// Exit codes: 0 success, 1 configuration or validation error, 2 I/O or parse
// error, 3 guidance provider failure, 4 numerical failure or internal error.

#include "meshstyle/cage.hpp"
#include "meshstyle/config.hpp"
#include "meshstyle/encoder.hpp"
#include "meshstyle/error.hpp"
#include "meshstyle/guidance.hpp"
#include "meshstyle/mesh.hpp"
#include "meshstyle/parts.hpp"
#include "meshstyle/pipeline.hpp"
#include "meshstyle/remote.hpp"
#include "meshstyle/renderer.hpp"
#include "meshstyle/symmetry.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifndef MESHSTYLE_VERSION
#define MESHSTYLE_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meshstyle;

namespace {

enum Exit { kOk = 0, kConfig = 1, kIo = 2, kProvider = 3, kInternal = 4 };

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_file(const fs::path& path, const char* what) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw IoError(std::string(what) + " not found: " + path.string());
}

// Centers the bounding box at the origin and scales the farthest vertex to radius 1.
Mesh normalized(const Mesh& mesh) {
  const VertexArray& V = mesh.vertices();
  const Vec3 lo = V.colwise().minCoeff().transpose(), hi = V.colwise().maxCoeff().transpose();
  const Vec3 c = 0.5 * (lo + hi);
  VertexArray out = V.rowwise() - c.transpose();
  const double r = out.rowwise().norm().maxCoeff();
  if (r > 0.0) out /= r;
  return mesh.with_vertices(out);
}

template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const DimensionError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << '\n';
    return kProvider;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kInternal;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
}

// ---------------------------------------------------------------- stylize

struct StylizeArgs {
  std::string config, mesh, labels, provider, endpoint, prompt, lora, parts_select, symmetry;
  std::string out = "out", target_mask, target_mesh, encoder;
  std::optional<std::uint64_t> seed;
  std::optional<long> n1, n2;
  bool deterministic = false, dry_run = false, normalize = false;
};

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": '" + tok + "' is not an integer");
    }
  }
  return out;
}

ScheduleConfig resolve_config(const StylizeArgs& a) {
  ScheduleConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    cfg = load_config(a.config);
  }
  if (!a.provider.empty()) cfg.provider.kind = a.provider;
  if (!a.endpoint.empty()) cfg.provider.endpoint = a.endpoint;
  if (!a.prompt.empty()) cfg.provider.prompt = a.prompt;
  if (!a.lora.empty()) cfg.provider.lora_id = a.lora;
  if (!a.parts_select.empty()) cfg.parts_select = parse_int_list(a.parts_select, "--parts-select");
  if (a.symmetry == "auto") cfg.symmetry = SymmetryMode::Auto;
  if (a.symmetry == "off") cfg.symmetry = SymmetryMode::Off;
  if (a.seed) cfg.seed = *a.seed;
  if (a.deterministic) {
    cfg.deterministic = true;
    cfg.threads = 1;
  }
  if (a.n1) cfg.n1 = *a.n1;
  if (a.n2) cfg.n2 = *a.n2;
  cfg.validate();
  return cfg;
}

int cmd_stylize(const StylizeArgs& a) {
  const ScheduleConfig cfg = resolve_config(a);
  const std::string& kind = cfg.provider.kind;

  if (a.dry_run) {
    std::cout << config_to_json(cfg) << '\n';
    return kOk;
  }

  // Everything is read and checked before the output directory exists.
  require_file(a.mesh, "mesh");
  Mesh mesh = load_obj(a.mesh);
  if (a.normalize) mesh = normalized(mesh);
  PartSet parts = a.labels.empty() ? PartSet(std::vector<long long>(mesh.num_vertices(), 0))
                                   : ingest_part_labels(mesh, a.labels);

  std::optional<EncoderMap> encoder;
  if (!a.encoder.empty()) {
    require_file(a.encoder, "encoder map");
    encoder = load_encoder_map(a.encoder);
  }
  const int res = cfg.camera.resolution;
  SoftRasterParams target_raster = cfg.raster;
  target_raster.keep_intermediates = false;

  std::shared_ptr<GuidanceProvider> provider;
  if (kind == "silhouette") {
    if (!a.target_mask.empty()) {
      require_file(a.target_mask, "target mask");
      Image mask = load_png_mask(a.target_mask);
      if (mask.height != res || mask.width != res)
        throw ValidationError("target mask is " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                              ", camera.resolution is " + std::to_string(res));
      provider = std::make_shared<SilhouetteGuidance>(fixed_target(std::move(mask)));
    } else if (!a.target_mesh.empty()) {
      require_file(a.target_mesh, "target mesh");
      Mesh target = load_obj(a.target_mesh);
      if (a.normalize) target = normalized(target);
      provider = std::make_shared<SilhouetteGuidance>(
          mesh_silhouette_target(target.vertices(), target.faces(), target_raster));
    } else {
      throw ConfigError("provider 'silhouette' needs --target-mask or --target-mesh");
    }
  } else if (kind == "latent-target") {
    if (a.target_mesh.empty()) throw ConfigError("provider 'latent-target' needs --target-mesh");
    require_file(a.target_mesh, "target mesh");
    Mesh target = load_obj(a.target_mesh);
    if (a.normalize) target = normalized(target);
    if (res % 8 != 0) throw ConfigError("latent guidance needs camera.resolution divisible by 8");
    const EncoderMap map = encoder ? *encoder : EncoderMap::passthrough(res, res);
    provider = std::make_shared<LatentTargetGuidance>(
        mesh_latent_target(target.vertices(), target.faces(), target_raster, map));
  } else if (kind == "sds") {
    RemoteOptions ro;
    ro.endpoint = cfg.provider.endpoint;
    ro.retries = cfg.provider.retries;
    ro.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.provider.timeout_s * 1000.0));
    SdsSettings ss{cfg.provider.prompt, cfg.provider.lora_id, cfg.provider.t_min, cfg.provider.t_max,
                   cfg.provider.cfg_scale};
    const DiffusionClient::Health h = DiffusionClient(ro).health();
    if (!ss.lora_id.empty() && std::find(h.lora_ids.begin(), h.lora_ids.end(), ss.lora_id) == h.lora_ids.end())
      throw ProviderError("service does not advertise LoRA '" + ss.lora_id + "'", false);
    provider = std::make_shared<RemoteSdsGuidance>(ro, ss);
  } else {
    throw ConfigError("unknown provider '" + kind + "'");
  }

  json inputs = json::object();
  auto add_input = [&](const char* key, const std::string& path) {
    if (!path.empty()) inputs[key] = {{"path", path}, {"sha256", sha256_file(path)}};
  };
  add_input("config", a.config);
  add_input("mesh", a.mesh);
  add_input("labels", a.labels);
  add_input("target_mask", a.target_mask);
  add_input("target_mesh", a.target_mesh);
  add_input("encoder", a.encoder);

  Stylizer stylizer(std::move(mesh), std::move(parts), cfg, provider, encoder);

  const fs::path out = a.out;
  fs::create_directories(out);
  json manifest;
  manifest["tool"] = "meshstyle";
  manifest["version"] = MESHSTYLE_VERSION;
  manifest["command"] = "stylize";
  manifest["created_utc"] = utc_timestamp();
  manifest["seed"] = cfg.seed;
  manifest["normalize"] = a.normalize;
  manifest["config"] = json::parse(config_to_json(cfg));
  manifest["inputs"] = inputs;
  {
    std::ofstream mf(out / "manifest.json");
    if (!mf) throw IoError("cannot write " + (out / "manifest.json").string());
    mf << manifest.dump(2) << '\n';
  }

  RunOptions ro;
  ro.out_dir = out;
  const long every = std::max<long>(1, cfg.checkpoint_interval > 0 ? cfg.checkpoint_interval : 50);
  ro.on_iteration = [&](const LossTerms& t) {
    if (t.iteration % every == 0 || t.iteration == cfg.n2)
      std::cerr << "iter " << t.iteration << '/' << cfg.n2 << " [" << t.stage << "] loss " << t.total() << '\n';
  };
  const RunResult r = run(stylizer, ro);
  std::cout << "wrote " << (out / "final.obj").string() << " after " << cfg.n2 << " iterations in " << r.seconds
            << " s\n";
  return kOk;
}

// ------------------------------------------------------------ fit-encoder

struct FitEncoderArgs {
  std::string pairs, service, out = ".";
  int n = 500;
  int resolution = 512;
  int batch = 4;
  std::uint64_t seed = 0;
};

// Random smooth color image: a background color plus a few Gaussian blobs.
Image random_color_image(std::mt19937_64& rng, int res) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(3, res, res);
  double bg[3] = {u(rng), u(rng), u(rng)};
  for (int c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < img.plane(); ++i) img.data[c * img.plane() + i] = bg[c];
  const int blobs = 3 + static_cast<int>(u(rng) * 4);
  for (int b = 0; b < blobs; ++b) {
    const double cx = u(rng) * res, cy = u(rng) * res, s = (0.05 + 0.25 * u(rng)) * res;
    const double col[3] = {u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5};
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        const double g = std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (2 * s * s));
        for (int c = 0; c < 3; ++c) img.at(c, y, x) += col[c] * g;
      }
  }
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

int cmd_fit_encoder(const FitEncoderArgs& a) {
  if (a.pairs.empty() == a.service.empty()) throw ConfigError("give exactly one of --pairs DIR or --service URL");
  std::optional<EncoderFitter> fitter;
  if (!a.pairs.empty()) {
    const auto files = list_pair_files(a.pairs);
    if (files.empty()) throw IoError("no .pair files in " + a.pairs);
    for (const auto& f : files) {
      const ImageLatentPair p = load_pair_file(f);
      if (!fitter) fitter.emplace(p.image.height, p.image.width);
      fitter->add(p.image, p.latent);
    }
  } else {
    if (a.n < 1 || a.batch < 1) throw ConfigError("--n and --batch must be positive");
    if (a.resolution < 8 || a.resolution % 8) throw ConfigError("--resolution must be a positive multiple of 8");
    RemoteOptions ro;
    ro.endpoint = a.service;
    DiffusionClient client(ro);
    std::mt19937_64 rng(a.seed);
    fitter.emplace(a.resolution, a.resolution);
    for (int done = 0; done < a.n;) {
      const int b = std::min(a.batch, a.n - done);
      std::vector<Image> images;
      for (int i = 0; i < b; ++i) images.push_back(random_color_image(rng, a.resolution));
      const std::vector<Image> latents = client.encode(images);
      for (int i = 0; i < b; ++i) fitter->add(images[i], latents[i]);
      done += b;
      std::cerr << "encoded " << done << '/' << a.n << '\n';
    }
  }
  const EncoderMap map = fitter->finish();
  fs::create_directories(a.out);
  save_encoder_map(fs::path(a.out) / "encoder.map", map);
  char line[96];
  std::snprintf(line, sizeof line, "residual %.6e", map.residual_rmse);
  std::cout << line << " over " << fitter->pairs() << " pairs (" << map.samples << " samples)\n";
  return kOk;
}

// -------------------------------------------------------- detect-symmetry

int cmd_detect_symmetry(const std::string& mesh_path, const std::string& out) {
  require_file(mesh_path, "mesh");
  const Mesh mesh = load_obj(mesh_path);
  const SymmetryDetection det = detect_symmetry(mesh.vertices());
  fs::create_directories(out);
  const fs::path path = fs::path(out) / "symmetry.txt";
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  const SymmetryThresholds th = SymmetryThresholds::relative_to(mesh.vertices());
  char line[256];
  std::snprintf(line, sizeof line, "# thresholds max_residual %.9g sum_residual %.9g\n", th.max_residual,
                th.sum_residual);
  f << line << "# axis accepted nx ny nz offset pairs max_residual sum_residual\n";
  for (const AxisCandidate& c : det.candidates) {
    std::size_t pairs = 0;
    double offset = c.axis.dot(mesh.centroid());
    for (const SymmetryPlane& p : det.planes)
      if (p.axis_index == c.axis_index) {
        pairs = p.pairs.size();
        offset = p.offset();
      }
    std::snprintf(line, sizeof line, "%d %d %.9g %.9g %.9g %.9g %zu %.9g %.9g\n", c.axis_index, c.accepted ? 1 : 0,
                  c.axis.x(), c.axis.y(), c.axis.z(), offset, pairs, c.max_residual, c.sum_residual);
    f << line;
  }
  std::cout << det.planes.size() << " symmetry plane(s); report in " << path.string() << '\n';
  return kOk;
}

// --------------------------------------------------------- render-preview

struct PreviewArgs {
  std::string mesh, out = "preview";
  int resolution = 256;
  double elevation = 20.0, distance = 5.0, fov = 30.0;
  bool normalize = false;
};

int cmd_render_preview(const PreviewArgs& a) {
  require_file(a.mesh, "mesh");
  Mesh mesh = load_obj(a.mesh);
  if (a.normalize) mesh = normalized(mesh);
  SoftRasterParams params;
  params.keep_intermediates = false;
  std::vector<Camera> cams;
  for (int k = 0; k < 8; ++k) cams.emplace_back(a.fov, a.distance, a.elevation, 45.0 * k, a.resolution);
  fs::create_directories(a.out);
  for (int k = 0; k < 8; ++k) {
    const RenderOutput r = render_soft(mesh.vertices(), mesh.faces(), cams[k], params);
    char name[32];
    std::snprintf(name, sizeof name, "view_az%03d.png", 45 * k);
    save_png(fs::path(a.out) / name, r.rgb);
  }
  std::cout << "wrote 8 views to " << a.out << '\n';
  return kOk;
}

// ------------------------------------------------------- segment-fallback

int cmd_segment_fallback(const std::string& mesh_path, int parts, std::uint64_t seed, const std::string& out) {
  require_file(mesh_path, "mesh");
  const Mesh mesh = load_obj(mesh_path);
  if (parts < 1 || parts > mesh.num_vertices())
    throw ConfigError("--parts must be in [1, " + std::to_string(mesh.num_vertices()) + "]");
  const PartSet ps = fallback_segment(mesh, parts, seed);
  fs::create_directories(out);
  const fs::path path = fs::path(out) / "labels.txt";
  save_part_labels(path, ps);
  std::cout << ps.num_parts() << " parts written to " << path.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshstyle: coarse-to-fine mesh stylization"};
  app.set_version_flag("--version", std::string("meshstyle ") + MESHSTYLE_VERSION);
  app.require_subcommand(1);

  StylizeArgs st;
  auto* stylize = app.add_subcommand("stylize", "Stylize a mesh and write checkpoints, report and final OBJ");
  stylize->add_option("--config", st.config, "JSON schedule config");
  stylize->add_option("--mesh", st.mesh, "Input OBJ")->required();
  stylize->add_option("--labels", st.labels, "Per-vertex part labels (one integer per line)");
  stylize->add_option("--provider", st.provider, "Guidance provider")
      ->check(CLI::IsMember({"silhouette", "latent-target", "sds"}));
  stylize->add_option("--endpoint", st.endpoint, "Diffusion service URL");
  stylize->add_option("--prompt", st.prompt, "Text prompt for score distillation");
  stylize->add_option("--lora", st.lora, "LoRA id advertised by the service");
  stylize->add_option("--parts-select", st.parts_select, "Comma-separated part ids to deform");
  stylize->add_option("--symmetry", st.symmetry, "Symmetry regularization")->check(CLI::IsMember({"auto", "off"}));
  stylize->add_option("--seed", st.seed, "Random seed");
  stylize->add_flag("--deterministic", st.deterministic, "Single-threaded, seed-determined run");
  stylize->add_option("--out", st.out, "Output directory")->capture_default_str();
  stylize->add_flag("--dry-run", st.dry_run, "Print the resolved config and exit");
  stylize->add_option("--target-mask", st.target_mask, "PNG silhouette for the silhouette provider");
  stylize->add_option("--target-mesh", st.target_mesh, "Reference OBJ for the silhouette/latent-target providers");
  stylize->add_option("--encoder", st.encoder, "Encoder map from fit-encoder");
  stylize->add_option("--n1", st.n1, "Override the coarse stage length");
  stylize->add_option("--n2", st.n2, "Override the total iteration count");
  stylize->add_flag("--normalize", st.normalize, "Center and scale meshes to the unit sphere");

  FitEncoderArgs fe;
  auto* fit = app.add_subcommand("fit-encoder", "Fit the affine image-to-latent map");
  fit->add_option("--pairs", fe.pairs, "Directory of .pair files");
  fit->add_option("--service", fe.service, "Diffusion service URL to encode random images with");
  fit->add_option("--n", fe.n, "Number of pairs to fetch from the service")->capture_default_str();
  fit->add_option("--resolution", fe.resolution, "Image size for service pairs")->capture_default_str();
  fit->add_option("--batch", fe.batch, "Images per encode request")->capture_default_str();
  fit->add_option("--seed", fe.seed, "Seed for the random images")->capture_default_str();
  fit->add_option("--out", fe.out, "Output directory for encoder.map")->capture_default_str();

  std::string sym_mesh, sym_out = ".";
  auto* sym = app.add_subcommand("detect-symmetry", "Detect reflective symmetry planes");
  sym->add_option("--mesh", sym_mesh, "Input OBJ")->required();
  sym->add_option("--out", sym_out, "Output directory for symmetry.txt")->capture_default_str();

  PreviewArgs pv;
  auto* prev = app.add_subcommand("render-preview", "Render an 8-view turntable at 45 degree steps");
  prev->add_option("--mesh", pv.mesh, "Input OBJ")->required();
  prev->add_option("--out", pv.out, "Output directory")->capture_default_str();
  prev->add_option("--resolution", pv.resolution, "Image size")->capture_default_str();
  prev->add_option("--elevation", pv.elevation, "Camera elevation in degrees")->capture_default_str();
  prev->add_option("--distance", pv.distance, "Camera distance")->capture_default_str();
  prev->add_option("--fov", pv.fov, "Vertical field of view in degrees")->capture_default_str();
  prev->add_flag("--normalize", pv.normalize, "Center and scale the mesh to the unit sphere");

  std::string seg_mesh, seg_out = ".";
  int seg_parts = 4;
  std::uint64_t seg_seed = 0;
  auto* seg = app.add_subcommand("segment-fallback", "k-means part labels when no segmentation is available");
  seg->add_option("--mesh", seg_mesh, "Input OBJ")->required();
  seg->add_option("--parts", seg_parts, "Number of parts")->capture_default_str();
  seg->add_option("--seed", seg_seed, "Random seed")->capture_default_str();
  seg->add_option("--out", seg_out, "Output directory for labels.txt")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  if (*stylize) return guarded([&] { return cmd_stylize(st); });
  if (*fit) return guarded([&] { return cmd_fit_encoder(fe); });
  if (*sym) return guarded([&] { return cmd_detect_symmetry(sym_mesh, sym_out); });
  if (*prev) return guarded([&] { return cmd_render_preview(pv); });
  if (*seg) return guarded([&] { return cmd_segment_fallback(seg_mesh, seg_parts, seg_seed, seg_out); });
  return kConfig;
}
