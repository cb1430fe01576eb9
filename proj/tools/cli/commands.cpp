#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "parallax/bundle.hpp"
#include "parallax/inpaint.hpp"
#include "parallax/io.hpp"
#include "parallax/json_util.hpp"
#include "parallax/normalize.hpp"
#include "parallax/viewsynth.hpp"
#include "pipeline.hpp"

namespace parallax::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Eigen::Vector3d parse_vec3(const std::string& s) {
  Eigen::Vector3d v;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &v.x(), &v.y(), &v.z(), &tail) != 3)
    throw UsageError("expected x,y,z but got '" + s + "'");
  return v;
}

struct Options {
  std::string config_file;
  std::vector<std::string> sets;
  long long seed = -1;
  unsigned workers = 0;
  std::string log_file;

  // subcommand arguments
  std::string locator;
  std::string out;
  std::size_t limit = 0;
  std::string dir;
  std::string bundle;
  std::string eye;
  bool look_at_center = false;
  bool path = false;
  std::size_t frames = 120;
  std::string serve;
  int port = 8080;
  unsigned render_workers = 0;
  std::string pred;
  std::string truth;
};

PipelineConfig make_config(const Options& o, bool limit_given) {
  PipelineConfig cfg;
  cfg.apply_environment();
  if (!o.config_file.empty()) cfg.load_file(o.config_file);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed >= 0) cfg.set("seed", std::to_string(o.seed));
  if (o.workers > 0) cfg.workers = o.workers;
  if (o.render_workers > 0) cfg.render_workers = o.render_workers;
  if (limit_given) cfg.limit = o.limit;
  return cfg;
}

void emit(const Log& log, const Options& o, std::ostream& err) {
  log.write(err);
  if (!o.log_file.empty()) log.write_file(o.log_file);
}

int stage_command(const Options& o, const PipelineConfig& cfg, Stage stage, std::ostream& err) {
  Log log;
  log.append(run_stages(record_dirs(o.dir), {stage}, cfg));
  emit(log, o, err);
  const bool failed = std::any_of(log.entries().begin(), log.entries().end(),
                                  [](const LogEntry& e) { return e.status == "error"; });
  return failed ? kExitFatal : kExitOk;
}

json timing_json(const viewsynth::TimingReport& r) {
  return {{"frames", r.frames}, {"mean_ms", r.mean_ms}, {"median_ms", r.median_ms}, {"p99_ms", r.p99_ms}};
}

json metrics_json(const SceneBundle& pred, const SceneBundle& truth) {
  json gds = json::array();
  for (std::size_t i = 0; i < 5; ++i) {
    const GDImage& p = pred.gds[i];
    const GDImage& t = truth.gds[i];
    if (p.width() != t.width() || p.height() != t.height()) throw Error("bundles differ in size");
    const Mask known = pred.known[i].empty() ? Mask(p.width(), p.height(), 1) : pred.known[i];
    // Both maps on the truth's inverse-depth scale.
    const NormalizedInverseDepth tn = normalize_inverse_depth(t.depth());
    NormalizedInverseDepth pn = tn;
    const double range = tn.degenerate ? 0.0 : tn.d_max_inv - tn.d_min;
    for (std::size_t k = 0; k < pn.values.size(); ++k)
      pn.values[k] = range > 0 ? (1.0 / p.depth().depth()[k] - tn.d_min) / range : 0.0;
    const auto d = inpaint::depth_loss(pn, tn, known);
    const auto in = inpaint::intensity_loss(p.intensity(), t.intensity(), known);
    gds.push_back({{"depth", {{"l_valid", d.l_valid}, {"l_hole", d.l_hole}, {"tv", d.tv_term}, {"total", d.total}}},
                   {"intensity", {{"l_valid", in.l_valid}, {"l_hole", in.l_hole}}}});
  }
  return {{"gds", gds}};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stereo card to explorable scene pipeline", "parallax"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_file, "key = value config file");
  app.add_option("--set", o.sets, "override a config key (key=value), repeatable")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--seed", o.seed, "random seed for robust estimation (default 0)");
  app.add_option("--workers", o.workers, "records processed concurrently");
  app.add_option("--log", o.log_file, "also write the JSON-lines log to this file");

  auto* ingest_cmd = app.add_subcommand("ingest", "fetch records and cull non-stereo pairs");
  ingest_cmd->add_option("locator", o.locator, "fixture directory or http(s) index URL")->required();
  ingest_cmd->add_option("--out", o.out, "output directory")->required();
  auto* limit_opt = ingest_cmd->add_option("--limit", o.limit, "maximum number of records (0 = all)");

  auto* rectify_cmd = app.add_subcommand("rectify", "rectify ingested records");
  rectify_cmd->add_option("dir", o.dir, "record or output directory")->required();
  auto* disparity_cmd = app.add_subcommand("disparity", "dense disparity and depth");
  disparity_cmd->add_option("dir", o.dir, "record or output directory")->required();
  auto* build_cmd = app.add_subcommand("build", "rig, corner views and scene bundle");
  build_cmd->add_option("dir", o.dir, "record or output directory")->required();

  auto* render_cmd = app.add_subcommand("render", "render novel views from a bundle");
  render_cmd->add_option("bundle", o.bundle, "bundle directory");
  render_cmd->add_option("--eye", o.eye, "eye position x,y,z in the reference frame");
  render_cmd->add_flag("--look-at-center", o.look_at_center, "aim at the scene centre instead of straight ahead");
  render_cmd->add_flag("--path", o.path, "render the benchmark camera path as numbered frames");
  render_cmd->add_option("--frames", o.frames, "frames along --path");
  render_cmd->add_option("--out", o.out, "output png (--eye) or directory (--path)");
  render_cmd->add_option("--serve", o.serve, "serve bundle directories over HTTP");
  render_cmd->add_option("--port", o.port, "port for --serve");
  render_cmd->add_option("--render-workers", o.render_workers, "tile workers");

  auto* bench_cmd = app.add_subcommand("bench", "time novel-view rendering");
  bench_cmd->add_option("bundle", o.bundle, "bundle directory")->required();
  bench_cmd->add_option("--frames", o.frames, "frames along the benchmark path");
  bench_cmd->add_option("--render-workers", o.render_workers, "tile workers");

  auto* metrics_cmd = app.add_subcommand("metrics", "inpainting losses of one bundle against another");
  metrics_cmd->add_option("pred", o.pred, "predicted bundle")->required();
  metrics_cmd->add_option("truth", o.truth, "reference bundle")->required();

  auto* all_cmd = app.add_subcommand("all", "full pipeline");
  all_cmd->add_option("locator", o.locator, "fixture directory or http(s) index URL")->required();
  all_cmd->add_option("--out", o.out, "output directory")->required();
  auto* all_limit = all_cmd->add_option("--limit", o.limit, "maximum number of records (0 = all)");

  if (!args.empty() && !args[0].empty() && args[0][0] != '-' && app.get_subcommand_no_throw(args[0]) == nullptr) {
    err << "error: unknown subcommand '" << args[0] << "'\n" << app.help();
    return kExitUsage;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    const PipelineConfig cfg = make_config(o, limit_opt->count() > 0 || all_limit->count() > 0);

    if (ingest_cmd->parsed()) {
      Log log;
      ingest_stage(o.locator, o.out, cfg, log);
      log.write_file(fs::path(o.out) / "log.jsonl");
      emit(log, o, err);
      return kExitOk;
    }
    if (rectify_cmd->parsed()) return stage_command(o, cfg, rectify_stage, err);
    if (disparity_cmd->parsed()) return stage_command(o, cfg, disparity_stage, err);
    if (build_cmd->parsed()) return stage_command(o, cfg, build_stage, err);

    if (all_cmd->parsed()) {
      Log log;
      const auto ids = ingest_stage(o.locator, o.out, cfg, log);
      std::vector<fs::path> go;
      for (const auto& e : log.entries())
        if (!e.record.empty() && (e.status == "keep" || e.status == "review")) go.push_back(fs::path(o.out) / e.record);
      log.append(run_stages(go, {rectify_stage, disparity_stage, build_stage}, cfg));
      log.write_file(fs::path(o.out) / "log.jsonl");
      emit(log, o, err);
      return kExitOk;
    }

    if (render_cmd->parsed()) {
      if (!o.serve.empty()) {
        err << json({{"stage", "serve"}, {"status", "ok"}, {"reason", "listening on port " + std::to_string(o.port)}}).dump()
            << std::endl;
        serve_bundles(o.serve, o.port);
        return kExitOk;
      }
      if (o.bundle.empty()) throw UsageError("render needs a bundle directory or --serve");
      if (o.out.empty()) throw UsageError("render needs --out");
      if (o.path == !o.eye.empty()) throw UsageError("render needs exactly one of --eye and --path");
      const SceneBundle b = bundle::load(o.bundle);
      viewsynth::Synthesizer synth(b, {cfg.render_workers});
      if (!o.eye.empty()) {
        const Eigen::Vector3d eye = parse_vec3(o.eye);
        const Eigen::Matrix3d rot = o.look_at_center ? look_at(b.head.clamp(eye), b.rig.center, b.rig.up)
                                                     : Eigen::Matrix3d(Eigen::Matrix3d::Identity());
        const fs::path file(o.out);
        if (file.has_parent_path()) fs::create_directories(file.parent_path());
        io::write_gray(file, synth.render(eye, rot).intensity);
        return kExitOk;
      }
      fs::create_directories(o.out);
      const auto poses = viewsynth::benchmark_path(b, o.frames);
      for (std::size_t i = 0; i < poses.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.png", i);
        io::write_gray(fs::path(o.out) / name, synth.render(poses[i].eye, poses[i].rotation).intensity);
      }
      return kExitOk;
    }

    if (bench_cmd->parsed()) {
      const SceneBundle b = bundle::load(o.bundle);
      const auto r = viewsynth::benchmark(b, o.frames, {cfg.render_workers});
      json j = timing_json(r);
      j["workers"] = cfg.render_workers;
      j["width"] = b.gds[0].width();
      j["height"] = b.gds[0].height();
      out << canonical_json(j);
      return kExitOk;
    }

    if (metrics_cmd->parsed()) {
      out << canonical_json(metrics_json(bundle::load(o.pred), bundle::load(o.truth)));
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << json({{"stage", "fatal"}, {"status", "error"}, {"reason", e.what()}}).dump() << "\n";
    return kExitFatal;
  }
  return kExitUsage;
}

}  // namespace parallax::cli
