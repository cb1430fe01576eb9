#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "commands.hpp"
#include "config.hpp"
#include "fixtures.hpp"
#include "parallax/bundle.hpp"
#include "parallax/io.hpp"
#include "pipeline.hpp"
#include "synthetic.hpp"

#include <httplib.h>

using namespace parallax;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("parallax_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Result {
  int status;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = cli::run(args, out, err);
  return {status, out.str(), err.str()};
}

std::vector<nlohmann::json> log_lines(const std::string& text) {
  std::vector<nlohmann::json> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line.front() == '{') lines.push_back(nlohmann::json::parse(line));
  return lines;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Relative path -> content for every regular file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  return files;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  auto r = run({"frobnicate"});
  CHECK(r.status == cli::kExitUsage);
  CHECK(r.err.find("unknown subcommand") != std::string::npos);
  CHECK(r.err.find("Usage") != std::string::npos);

  CHECK(run({}).status == cli::kExitUsage);
  CHECK(run({"render"}).status == cli::kExitUsage);
  CHECK(run({"--set", "bogus=1", "bench", "x"}).status == cli::kExitUsage);
  CHECK(run({"--set", "ratio=abc", "bench", "x"}).status == cli::kExitUsage);
  CHECK(run({"--help"}).status == cli::kExitOk);
}

TEST_CASE("config keys, files and environment") {
  cli::PipelineConfig cfg;
  CHECK(cfg.match.ratio == 0.7);
  CHECK(cfg.match.min_good == 10);
  CHECK(cfg.disparity.vertical_slack == 2);

  cfg.set("ratio", "0.6");
  cfg.set("max_disp", "48");
  cfg.set("guided", "false");
  CHECK(cfg.match.ratio == 0.6);
  CHECK(cfg.disparity.max_disp == 48);
  CHECK_FALSE(cfg.guided);
  CHECK_THROWS_AS(cfg.set("ratio", "-1"), cli::UsageError);
  CHECK_THROWS_AS(cfg.set("nope", "1"), cli::UsageError);
  CHECK_THROWS_AS(cfg.set("max_size", "12x"), cli::UsageError);

  TempDir dir("config");
  std::ofstream(dir.path / "a.conf") << "# tuning\nratio = 0.65  # inline\n\nhttp_timeout=3\n";
  cli::PipelineConfig from_file;
  from_file.load_file((dir.path / "a.conf").string());
  CHECK(from_file.match.ratio == 0.65);
  CHECK(from_file.fetch.timeout_seconds == 3);

  std::ofstream(dir.path / "b.conf") << "ratio 0.5\n";
  CHECK_THROWS_AS(from_file.load_file((dir.path / "b.conf").string()), cli::UsageError);
  CHECK_THROWS_AS(from_file.load_file((dir.path / "none.conf").string()), cli::UsageError);

  ::setenv("PARALLAX_HTTP_TIMEOUT", "17", 1);
  cli::PipelineConfig env;
  env.apply_environment();
  CHECK(env.fetch.timeout_seconds == 17);
  ::unsetenv("PARALLAX_HTTP_TIMEOUT");

  const auto j = cfg.to_json();
  CHECK(j.contains("ratio"));
  CHECK_FALSE(j.contains("workers"));
}

TEST_CASE("full pipeline over the fixture set") {
  TempDir dir("all");
  testing::write_fixture_set(dir.path / "fx");
  const fs::path out1 = dir.path / "run1", out2 = dir.path / "run2", out3 = dir.path / "run3";

  const auto r = run({"all", (dir.path / "fx").string(), "--out", out1.string()});
  REQUIRE(r.status == cli::kExitOk);
  const auto log = log_lines(r.err);
  int culls = 0;
  for (const auto& e : log) {
    CHECK(e.contains("record"));
    CHECK(e.contains("stage"));
    CHECK(e.contains("status"));
    CHECK(e.contains("reason"));
    if (e["status"] == "cull") ++culls;
  }
  CHECK(culls == 1);
  CHECK(fs::exists(out1 / "card_a" / "bundle" / bundle::kManifestName));
  CHECK(fs::exists(out1 / "card_c" / "bundle" / bundle::kManifestName));
  CHECK_FALSE(fs::exists(out1 / "card_b" / "bundle"));
  CHECK(slurp(out1 / "log.jsonl") == r.err);

  REQUIRE(run({"all", (dir.path / "fx").string(), "--out", out2.string()}).status == cli::kExitOk);
  REQUIRE(run({"--workers", "3", "all", (dir.path / "fx").string(), "--out", out3.string()}).status ==
          cli::kExitOk);
  const auto t1 = tree(out1);
  CHECK(t1 == tree(out2));
  CHECK(t1 == tree(out3));

  SUBCASE("render at the origin gives the reference view") {
    const fs::path bundle_dir = out1 / "card_a" / "bundle";
    const fs::path png = dir.path / "ref.png";
    REQUIRE(run({"render", bundle_dir.string(), "--eye", "0,0,0", "--out", png.string()}).status == cli::kExitOk);
    const auto b = bundle::load(bundle_dir);
    const ImageGray img = io::read_gray(png);
    const auto& ref = b.gds[0].intensity();
    REQUIRE(img.same_shape(ref));
    // Along depth edges and in noisy far background the corner meshes can
    // win the depth test; everywhere else this is the reference up to 8-bit
    // quantization.
    std::size_t off = 0;
    for (std::size_t i = 0; i < img.size(); ++i)
      if (std::abs(img[i] - ref[i]) > 1.0f / 255.0f + 1e-6f) ++off;
    CHECK(static_cast<double>(off) <= 0.03 * static_cast<double>(img.size()));
  }
  SUBCASE("path rendering and bench") {
    const fs::path bundle_dir = out1 / "card_c" / "bundle";
    REQUIRE(run({"render", bundle_dir.string(), "--path", "--frames", "4", "--out", (dir.path / "path").string()})
                .status == cli::kExitOk);
    CHECK(fs::exists(dir.path / "path" / "frame_0003.png"));
    const auto b = run({"bench", bundle_dir.string(), "--frames", "3"});
    REQUIRE(b.status == cli::kExitOk);
    const auto j = nlohmann::json::parse(b.out);
    CHECK(j["frames"] == 3);
    CHECK(j["p99_ms"].get<double>() >= j["median_ms"].get<double>());
  }
  SUBCASE("metrics of a bundle against itself") {
    const fs::path bundle_dir = out1 / "card_a" / "bundle";
    const auto m = run({"metrics", bundle_dir.string(), bundle_dir.string()});
    REQUIRE(m.status == cli::kExitOk);
    const auto j = nlohmann::json::parse(m.out);
    REQUIRE(j.is_object());
    CHECK(j.dump().find("total") != std::string::npos);
  }
  SUBCASE("stages rerun from disk are byte-identical") {
    REQUIRE(run({"build", out1.string()}).status == cli::kExitOk);
    CHECK(tree(out1) == t1);
  }
}

TEST_CASE("missing inputs are reported per record") {
  TempDir dir("missing");
  CHECK(run({"all", (dir.path / "nowhere").string(), "--out", (dir.path / "o").string()}).status ==
        cli::kExitFatal);
  CHECK(run({"render", (dir.path / "nobundle").string(), "--eye", "0,0,0", "--out", "x.png"}).status ==
        cli::kExitFatal);

  // A record directory without its rectified inputs fails, the batch does not.
  testing::write_fixture_set(dir.path / "fx");
  REQUIRE(run({"ingest", (dir.path / "fx").string(), "--out", (dir.path / "o").string(), "--limit", "1"}).status ==
          cli::kExitOk);
  const auto r = run({"disparity", (dir.path / "o").string()});
  const auto log = log_lines(r.err);
  REQUIRE(log.size() == 1);
  CHECK(log[0]["record"] == "card_a");
  CHECK(log[0]["status"] == "error");
}

TEST_CASE("bundle directories are served over HTTP") {
  TempDir dir("serve");
  bundle::save(testing::plane_bundle(24, 16), dir.path / "scene");
  auto server = cli::make_bundle_server(dir.path);
  const int port = server->bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server->listen_after_bind(); });
  server->wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto res = client.Get("/scene/manifest.json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == slurp(dir.path / "scene" / "manifest.json"));
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  auto missing = client.Get("/scene/absent.png");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server->stop();
  thread.join();
}
