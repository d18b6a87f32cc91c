// Command-line front end: scene generation, rendering, query generation,
// localization and batch evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "panoloc/evaluation.hpp"
#include "panoloc/pipeline.hpp"
#include "panoloc/render.hpp"
#include "panoloc/scene.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace panoloc;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 0;
  std::string scene;
  std::string cache_dir;
  std::string output;
  GridConfig grid;
  MatcherConfig matcher;
  RefineConfig refine;
  int top_n = 3;
  int refine_rounds = 1;
  int pano_width = kDefaultPanoWidth;
  int pano_height = kDefaultPanoHeight;
  QueryConfig query;
  SyntheticSceneParams scene_params;
  int scenes = 20;
  std::string metric_mode = "3d";
  int debug_views = 4;

  json to_json() const {
    return {
        {"seed", seed},
        {"threads", threads},
        {"scene", scene},
        {"cache_dir", cache_dir},
        {"output", output},
        {"grid", {{"spacing", grid.spacing}, {"mode", to_string(grid.mode)}, {"h_pano", grid.h_pano}}},
        {"matcher",
         {{"yaw_step_deg", matcher.yaw_step_deg},
          {"pitch_deg", matcher.pitch_deg},
          {"roll_deg", matcher.roll_deg},
          {"pano_grid", {matcher.pano_grid_width, matcher.pano_grid_height}},
          {"query_grid", matcher.query_grid},
          {"polish_count", matcher.polish_count},
          {"polish_step_deg", matcher.polish_step_deg},
          {"polish_min_step_deg", matcher.polish_min_step_deg}}},
        {"refine",
         {{"translation_step", refine.translation_step},
          {"rotation_step_deg", refine.rotation_step_deg},
          {"max_evaluations", refine.max_evaluations},
          {"render_size", refine.render_size},
          {"bound_xy", refine.bound_xy},
          {"bound_z", refine.bound_z}}},
        {"top_n", top_n},
        {"refine_rounds", refine_rounds},
        {"pano", {pano_width, pano_height}},
        {"query",
         {{"count", query.count},
          {"fov_deg", query.hfov_deg},
          {"tilt_deg", query.tilt_max_deg},
          {"height_range", {query.min_height, query.max_height}},
          {"image_size", query.image_size},
          {"presence_threshold", query.presence_threshold},
          {"min_center_distance", query.min_center_distance}}},
        {"rooms", {scene_params.min_rooms, scene_params.max_rooms}},
        {"scenes", scenes},
        {"metric_mode", metric_mode},
    };
  }

  // Settings from a config document; absent keys keep their defaults.
  void merge(const json& j) {
    seed = j.value("seed", seed);
    threads = j.value("threads", threads);
    scene = j.value("scene", scene);
    cache_dir = j.value("cache_dir", cache_dir);
    output = j.value("output", output);
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      grid.spacing = g.value("spacing", grid.spacing);
      if (g.contains("mode")) grid.mode = grid_mode_from_string(g["mode"].get<std::string>());
      grid.h_pano = g.value("h_pano", grid.h_pano);
    }
    if (j.contains("matcher")) {
      const auto& m = j["matcher"];
      matcher.yaw_step_deg = m.value("yaw_step_deg", matcher.yaw_step_deg);
      matcher.pitch_deg = m.value("pitch_deg", matcher.pitch_deg);
      matcher.roll_deg = m.value("roll_deg", matcher.roll_deg);
      matcher.query_grid = m.value("query_grid", matcher.query_grid);
      matcher.polish_count = m.value("polish_count", matcher.polish_count);
      matcher.polish_step_deg = m.value("polish_step_deg", matcher.polish_step_deg);
      matcher.polish_min_step_deg = m.value("polish_min_step_deg", matcher.polish_min_step_deg);
    }
    if (j.contains("refine")) {
      const auto& r = j["refine"];
      refine.translation_step = r.value("translation_step", refine.translation_step);
      refine.rotation_step_deg = r.value("rotation_step_deg", refine.rotation_step_deg);
      refine.max_evaluations = r.value("max_evaluations", refine.max_evaluations);
      refine.render_size = r.value("render_size", refine.render_size);
      refine.bound_xy = r.value("bound_xy", refine.bound_xy);
      refine.bound_z = r.value("bound_z", refine.bound_z);
    }
    top_n = j.value("top_n", top_n);
    refine_rounds = j.value("refine_rounds", refine_rounds);
    if (j.contains("pano")) {
      pano_width = j["pano"].at(0).get<int>();
      pano_height = j["pano"].at(1).get<int>();
    }
    if (j.contains("query")) {
      const auto& q = j["query"];
      query.count = q.value("count", query.count);
      query.hfov_deg = q.value("fov_deg", query.hfov_deg);
      query.tilt_max_deg = q.value("tilt_deg", query.tilt_max_deg);
      if (q.contains("height_range")) {
        query.min_height = q["height_range"].at(0).get<double>();
        query.max_height = q["height_range"].at(1).get<double>();
      }
      query.image_size = q.value("image_size", query.image_size);
    }
    if (j.contains("rooms")) {
      scene_params.min_rooms = j["rooms"].at(0).get<int>();
      scene_params.max_rooms = j["rooms"].at(1).get<int>();
    }
    scenes = j.value("scenes", scenes);
    metric_mode = j.value("metric_mode", metric_mode);
  }

  LocalizeConfig localize_config() const {
    LocalizeConfig c;
    c.top_n = top_n;
    c.refine_rounds = refine_rounds;
    c.matcher = matcher;
    c.refine = refine;
    return c;
  }
};

void parse_rooms(const std::string& s, SyntheticSceneParams& p) {
  const auto dots = s.find("..");
  try {
    if (dots == std::string::npos) {
      p.min_rooms = p.max_rooms = std::stoi(s);
    } else {
      p.min_rooms = std::stoi(s.substr(0, dots));
      p.max_rooms = std::stoi(s.substr(dots + 2));
    }
  } catch (const std::exception&) {
    throw CLI::ValidationError("--rooms", "expected N or MIN..MAX");
  }
}

std::vector<double> parse_vector(const std::string& s, std::size_t n, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  if (out.size() != n) throw CLI::ValidationError(what, "expected " + std::to_string(n) + " comma-separated numbers");
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void echo_config(const RunConfig& cfg, const fs::path& dir) { write_json(dir / "run_config.json", cfg.to_json()); }

Scene load_valid_scene(const std::string& path) {
  if (path.empty()) throw std::runtime_error("--scene is required");
  if (!fs::exists(path)) throw std::runtime_error("scene file not found: " + path);
  Scene scene = load_scene(path);
  const auto problems = validate_scene(scene);
  if (!problems.empty()) throw InvalidSceneError(path + ": " + problems.front());
  return scene;
}

std::string resolve_cache_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv("PANOLOC_CACHE_DIR"); env && *env) return env;
  return cfg.cache_dir;
}

void log_line(const std::string& msg) { std::cerr << msg << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indoor camera localization against semantic floor-plan renders"};
  app.require_subcommand(1);
  app.fallthrough();
  RunConfig cfg;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config document; flags override it")->check(CLI::ExistingFile);
  app.add_option("--threads", cfg.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", cfg.seed, "random seed");

  // Flags shared by several subcommands.
  std::string rooms, position, pose_json, grid_mode;
  auto add_grid_flags = [&](CLI::App* sub) {
    sub->add_option("--spacing", cfg.grid.spacing, "reference grid spacing in meters");
    sub->add_option("--grid-mode", grid_mode, "global or local")->check(CLI::IsMember({"global", "local"}));
    sub->add_option("--h-pano", cfg.grid.h_pano, "reference camera height above the floor");
    sub->add_option("--top-n", cfg.top_n, "refined candidates");
    sub->add_option("--refine-rounds", cfg.refine_rounds, "re-render and refine rounds");
    sub->add_option("--yaw-step", cfg.matcher.yaw_step_deg, "hypothesis yaw step in degrees");
    sub->add_option("--polish-count", cfg.matcher.polish_count, "references whose rotation is polished");
    sub->add_option("--max-evals", cfg.refine.max_evaluations, "refinement objective budget");
    sub->add_option("--cache-dir", cfg.cache_dir, "reference panorama cache (env PANOLOC_CACHE_DIR overrides)");
  };

  auto* gen_scene = app.add_subcommand("gen-scene", "generate a synthetic apartment");
  gen_scene->add_option("--rooms", rooms, "room count, N or MIN..MAX");
  gen_scene->add_option("-o,--output", cfg.output, "scene JSON path")->required();

  auto* validate = app.add_subcommand("validate", "check a scene file");
  validate->add_option("scene", cfg.scene, "scene JSON path")->required();

  std::string render_mode = "pano";
  auto* render = app.add_subcommand("render", "render a panorama or perspective view");
  render->add_option("--scene", cfg.scene)->required();
  render->add_option("--mode", render_mode)->check(CLI::IsMember({"pano", "persp"}));
  render->add_option("--position", position, "x,y,z for panoramas");
  render->add_option("--pose", pose_json, R"(perspective pose as {"q":[w,x,y,z],"t":[x,y,z]})");
  render->add_option("--width", cfg.pano_width);
  render->add_option("--height", cfg.pano_height);
  render->add_option("--fov", cfg.query.hfov_deg, "horizontal field of view in degrees");
  render->add_option("-o,--output", cfg.output, "output directory")->required();

  auto* gen_queries = app.add_subcommand("gen-queries", "sample and render query views");
  gen_queries->add_option("--scene", cfg.scene)->required();
  gen_queries->add_option("--count", cfg.query.count);
  gen_queries->add_option("--fov", cfg.query.hfov_deg);
  gen_queries->add_option("--tilt", cfg.query.tilt_max_deg, "max pitch and roll in degrees");
  gen_queries->add_option("--size", cfg.query.image_size, "query image side in pixels");
  gen_queries->add_option("-o,--output", cfg.output, "output directory")->required();

  std::string query_png, queries_dir;
  int query_id = -1;
  auto* localize_cmd = app.add_subcommand("localize", "localize one query image");
  localize_cmd->add_option("--scene", cfg.scene)->required();
  localize_cmd->add_option("--query", query_png, "semantic query PNG");
  localize_cmd->add_option("--queries", queries_dir, "gen-queries output directory");
  localize_cmd->add_option("--query-id", query_id, "query index inside --queries");
  localize_cmd->add_option("--fov", cfg.query.hfov_deg);
  localize_cmd->add_option("-o,--output", cfg.output, "output directory")->required();
  add_grid_flags(localize_cmd);

  auto* evaluate = app.add_subcommand("evaluate", "batch localization and metrics");
  evaluate->add_option("--scene", cfg.scene, "scene JSON; omit for the synthetic suite");
  evaluate->add_option("--queries", queries_dir, "gen-queries output directory for --scene");
  evaluate->add_option("--scenes", cfg.scenes, "synthetic apartments");
  evaluate->add_option("--rooms", rooms, "room count, N or MIN..MAX");
  evaluate->add_option("--count", cfg.query.count, "queries per synthetic apartment");
  evaluate->add_option("--fov", cfg.query.hfov_deg);
  evaluate->add_option("--tilt", cfg.query.tilt_max_deg);
  evaluate->add_option("--metric-mode", cfg.metric_mode)->check(CLI::IsMember({"2d", "3d"}));
  evaluate->add_option("--debug-views", cfg.debug_views, "debug overlays to write");
  evaluate->add_option("-o,--output", cfg.output, "report directory")->required();
  add_grid_flags(evaluate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    // Config document first, then re-apply explicit flags on top of it.
    if (!config_path.empty()) {
      cfg.merge(read_json(config_path));
      app.parse(argc, argv);
    }
    if (!rooms.empty()) parse_rooms(rooms, cfg.scene_params);
    if (!grid_mode.empty()) cfg.grid.mode = grid_mode_from_string(grid_mode);
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);

    if (*gen_scene) {
      const Scene scene = generate_synthetic_scene(cfg.seed, cfg.scene_params);
      const fs::path dir = fs::path(cfg.output).has_parent_path() ? fs::path(cfg.output).parent_path() : fs::path(".");
      fs::create_directories(dir);
      save_scene(scene, cfg.output);
      echo_config(cfg, dir);
      log_line("wrote " + cfg.output + " (" + std::to_string(scene.rooms.size()) + " rooms)");
      return 0;
    }

    if (*validate) {
      const Scene scene = load_scene(cfg.scene);
      const auto problems = validate_scene(scene);
      for (const auto& p : problems) std::cout << p << '\n';
      if (!problems.empty()) return 1;
      std::cout << "ok: " << scene.rooms.size() << " rooms, " << scene.wall_items.size() << " wall items\n";
      return 0;
    }

    if (*render) {
      const Scene scene = load_valid_scene(cfg.scene);
      const PrimitiveSet prims = scene_to_primitives(scene);
      RenderBundle b;
      if (render_mode == "pano") {
        if (position.empty()) throw CLI::ValidationError("--position", "required for panoramas");
        const auto p = parse_vector(position, 3, "--position");
        b = render_panorama(prims, Eigen::Vector3d(p[0], p[1], p[2]), cfg.pano_width, cfg.pano_height);
      } else {
        if (pose_json.empty()) throw CLI::ValidationError("--pose", "required for perspective renders");
        const CameraIntrinsics k{cfg.query.hfov_deg * kDeg, cfg.pano_width, cfg.pano_height};
        b = render_perspective(prims, pose_from_json(json::parse(pose_json)), k);
      }
      const fs::path dir(cfg.output);
      fs::create_directories(dir);
      write_semantic_png((dir / "semantic.png").string(), b.semantic);
      write_depth_png((dir / "depth.png").string(), b.depth);
      write_normal_png((dir / "normal.png").string(), b.normal);
      echo_config(cfg, dir);
      return 0;
    }

    if (*gen_queries) {
      const Scene scene = load_valid_scene(cfg.scene);
      const PrimitiveSet prims = scene_to_primitives(scene);
      const auto specs = sample_query_poses(scene, prims, cfg.query, cfg.seed, fs::path(cfg.scene).stem().string());
      const fs::path dir(cfg.output);
      fs::create_directories(dir);
      const CameraIntrinsics k = cfg.query.intrinsics();
      json poses = json::array();
      for (const auto& q : specs) {
        char name[32];
        std::snprintf(name, sizeof name, "query_%04d.png", q.index);
        write_semantic_png((dir / name).string(), render_perspective(prims, q.pose, k).semantic);
        poses.push_back({{"index", q.index},
                         {"file", name},
                         {"fov_deg", cfg.query.hfov_deg},
                         {"pose", pose_to_json(q.pose)},
                         {"class_count", q.class_count},
                         {"center_distance", q.center_distance}});
      }
      write_json(dir / "poses.json", poses);
      echo_config(cfg, dir);
      log_line("wrote " + std::to_string(specs.size()) + " queries to " + dir.string());
      return 0;
    }

    const std::string cache_dir = resolve_cache_dir(cfg);
    ReferenceCache cache(cache_dir);

    if (*localize_cmd) {
      auto scene = std::make_shared<const Scene>(load_valid_scene(cfg.scene));
      auto prims = std::make_shared<const PrimitiveSet>(scene_to_primitives(*scene));
      std::optional<Pose> gt;
      if (!queries_dir.empty()) {
        if (query_id < 0) throw CLI::ValidationError("--query-id", "required with --queries");
        const json poses = read_json((fs::path(queries_dir) / "poses.json").string());
        if (query_id >= static_cast<int>(poses.size())) throw std::runtime_error("query id out of range");
        const json& rec = poses.at(query_id);
        query_png = (fs::path(queries_dir) / rec.at("file").get<std::string>()).string();
        cfg.query.hfov_deg = rec.at("fov_deg").get<double>();
        gt = pose_from_json(rec.at("pose"));
      }
      if (query_png.empty()) throw CLI::ValidationError("--query", "a query PNG or --queries/--query-id is required");
      const SemanticImage query = read_semantic_png(query_png);
      const CameraIntrinsics k{cfg.query.hfov_deg * kDeg, query.width(), query.height()};
      const auto positions = sample_reference_positions(*scene, cfg.grid);
      const ReferenceSet refs = build_reference_set(scene, prims, positions, cfg.pano_width, cfg.pano_height,
                                                    cfg.matcher, cfg.grid, &cache);
      log_line("references: " + std::to_string(refs.size()) + " (rendered " + std::to_string(cache.render_count()) +
          ", from cache " + std::to_string(cache.disk_hits()) + ")");
      const LocalizationResult result = localize(refs, query, k, cfg.localize_config());
      json out = to_json(result, refs);
      if (gt) {
        const PoseError e = pose_error(*gt, result.selected);
        out["ground_truth"] = pose_to_json(*gt);
        out["error"] = {{"terr_xyz_cm", e.terr_xyz_cm},
                        {"terr_xy_cm", e.terr_xy_cm},
                        {"rerr_3d_deg", e.rerr_3d_deg},
                        {"rerr_yaw_deg", e.rerr_yaw_deg}};
      }
      const fs::path dir(cfg.output);
      write_json(dir / "result.json", out);
      const Candidate& top = result.candidates.front();
      write_rgb_png((dir / "debug.png").string(),
                    debug_overlay(query, render_perspective(*prims, top.pose, k).semantic,
                                  refs.references[top.reference_index]->bundle.semantic, top.match.bbox));
      echo_config(cfg, dir);
      return 0;
    }

    if (*evaluate) {
      const fs::path dir(cfg.output);
      const MetricMode mode = metric_mode_from_string(cfg.metric_mode);
      if (cfg.scene.empty()) {
        SuiteConfig suite;
        suite.scenes = cfg.scenes;
        suite.seed = cfg.seed;
        suite.scene_params = cfg.scene_params;
        suite.query = cfg.query;
        suite.grid = cfg.grid;
        suite.localize = cfg.localize_config();
        suite.pano_width = cfg.pano_width;
        suite.pano_height = cfg.pano_height;
        suite.mode = mode;
        suite.debug_views = cfg.debug_views;
        const SuiteResult r = run_synthetic_suite(suite, &cache, log_line);
        write_report(r.metrics, r.records, dir.string(), r.debug);
        echo_config(cfg, dir);
        std::cout << metrics_to_json(r.metrics).dump(2) << '\n';
        return metrics_consistent(r.metrics) ? 0 : 1;
      }

      if (queries_dir.empty()) throw CLI::ValidationError("--queries", "required with --scene");
      auto scene = std::make_shared<const Scene>(load_valid_scene(cfg.scene));
      auto prims = std::make_shared<const PrimitiveSet>(scene_to_primitives(*scene));
      const auto positions = sample_reference_positions(*scene, cfg.grid);
      const ReferenceSet refs = build_reference_set(scene, prims, positions, cfg.pano_width, cfg.pano_height,
                                                    cfg.matcher, cfg.grid, &cache);
      const json poses = read_json((fs::path(queries_dir) / "poses.json").string());
      std::vector<QueryRecord> records(poses.size());
      std::vector<std::string> failures(poses.size());
      const LocalizeConfig lc = cfg.localize_config();
#pragma omp parallel for schedule(dynamic)
      for (std::size_t i = 0; i < poses.size(); ++i) {
        try {
          const json& rec = poses[i];
          const SemanticImage query =
              read_semantic_png((fs::path(queries_dir) / rec.at("file").get<std::string>()).string());
          const double fov = rec.at("fov_deg").get<double>();
          const CameraIntrinsics k{fov * kDeg, query.width(), query.height()};
          const LocalizationResult loc = localize(refs, query, k, lc);
          QueryRecord& r = records[i];
          r.scene_id = fs::path(cfg.scene).stem().string();
          r.query_index = rec.at("index").get<int>();
          r.hfov_deg = fov;
          r.gt = pose_from_json(rec.at("pose"));
          r.est = loc.selected;
          r.error = pose_error(r.gt, r.est);
          r.score = loc.selected_score;
          r.best_of_k = r.error;
          for (const auto& c : loc.candidates) {
            const PoseError e = pose_error(r.gt, c.pose);
            if (terr_cm(e, mode) < terr_cm(r.best_of_k, mode)) r.best_of_k = e;
          }
        } catch (const std::exception& e) {
          failures[i] = e.what();
        }
      }
      for (const auto& f : failures) {
        if (!f.empty()) throw std::runtime_error(f);
      }
      std::vector<PoseError> errors, topk;
      for (const auto& r : records) {
        errors.push_back(r.error);
        topk.push_back(r.best_of_k);
      }
      Metrics m = compute_metrics(errors, topk, mode);
      m.config = cfg.to_json();
      // Thread count does not change results and would break byte identity across runs.
      m.config.erase("threads");
      write_report(m, records, dir.string());
      echo_config(cfg, dir);
      std::cout << metrics_to_json(m).dump(2) << '\n';
      return metrics_consistent(m) ? 0 : 1;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
