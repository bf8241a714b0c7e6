#include <doctest.h>

#include <filesystem>

#include "sfr/campaign.hpp"
#include "sfr/io.hpp"

using namespace sfr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sfr_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_config(const std::string& name) {
  ExperimentConfig c;
  c.out_dir = scratch(name);
  c.sim.ir_len = 256;
  c.sim.max_order = 3;
  c.filter_len = 64;
  c.source_count = 4;
  return c;
}

std::string dir_digest(const fs::path& dir) {
  std::string all;
  for (int i = 0; i < 11; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "ch%02d.wav", i);
    all += digest(read_text(dir / name));
  }
  return all;
}

}  // namespace

TEST_CASE("config round trip and validation") {
  ExperimentConfig c;
  c.seed = 7;
  c.methods = {"fd", "spmnet"};
  c.loss.lambda = {1.0, 0.5, 0.1, 0.2, 2.0};
  c.deep.max_iter = 321;
  const ExperimentConfig r = parse_config(to_ini(c));
  CHECK(to_ini(r) == to_ini(c));
  CHECK(r.seed == 7);
  CHECK(r.methods == c.methods);
  CHECK(r.loss.lambda == c.loss.lambda);
  CHECK(r.deep.max_iter == 321);

  CHECK_THROWS_AS(parse_config("[experiment]\nbogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[experiment]\nmethods = fd,magic\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[experiment]\nmethods = spmnet3\npositions = O,L\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[experiment]\nseed = -3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config("[fd]\nbeta_rel = -1\n"), std::invalid_argument);
  CHECK_NOTHROW(parse_config("[experiment]\nmethods = spmnet3\npositions = LL,O,RR\n"));

  ExperimentConfig empty;
  empty.methods.clear();
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  empty = ExperimentConfig{};
  empty.positions.clear();
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
  empty = ExperimentConfig{};
  empty.source_count = 0;
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

  CHECK(ExperimentConfig{}.sources().size() == 12);
  CHECK(ExperimentConfig{}.sources()[1] == 30.0);
}

TEST_CASE("simulate writes one multichannel file per loudspeaker") {
  ExperimentConfig c = small_config("sim");
  cmd_simulate(c);
  for (const auto& p : c.positions) {
    const fs::path dir = c.out_dir / "ir" / p;
    CHECK(fs::exists(dir / "manifest.json"));
    for (int l = 0; l < 11; ++l) {
      char name[16];
      std::snprintf(name, sizeof name, "ch%02d.wav", l);
      const WavData w = read_wav(dir / name);
      CHECK(w.channels.size() == 16);
      CHECK(w.channels[0].size() == 256);
    }
    CHECK(!fs::exists(dir / "ch11.wav"));
  }
  const std::string first = dir_digest(c.out_dir / "ir" / "O");
  cmd_simulate(c);
  CHECK(dir_digest(c.out_dir / "ir" / "O") == first);
  c.seed = 2;
  cmd_simulate(c);
  CHECK(dir_digest(c.out_dir / "ir" / "O") != first);
  CHECK(load_channels(c.out_dir / "ir" / "O", 11).length == 256);
  fs::remove_all(c.out_dir);
}

TEST_CASE("design, evaluate and report on a small campaign") {
  ExperimentConfig c = small_config("campaign");
  c.methods = {"ori", "fd"};
  c.positions = {"L", "O"};

  // Designing before simulating is an itemized failure, not a crash.
  CHECK_THROWS(cmd_design(c));

  cmd_simulate(c);
  ExperimentConfig one = c;
  one.methods = {"fd"};
  one.source_azimuths_deg = {90.0};
  const DesignReport single = cmd_design(one);
  CHECK(single.jobs.size() == 1);
  CHECK(!single.any_failed());
  CHECK(fs::exists(c.out_dir / "filters" / "fd" / "az090.wav"));
  CHECK(fs::exists(c.out_dir / "filters" / "fd" / "az090.json"));
  CHECK(!fs::exists(c.out_dir / "logs" / "fd"));

  const DesignReport rep = cmd_design(c);
  CHECK(rep.jobs.size() == 8);
  CHECK(!rep.any_failed());
  CHECK(fs::exists(c.out_dir / "design_summary.json"));

  const RunReport r = cmd_evaluate(c);
  CHECK(r.failures.empty());
  CHECK(r.metrics.size() == 2 * 4 * 2);
  CHECK(fs::exists(c.out_dir / "eval" / "sspm" / "fd_O.pgm"));
  CHECK(fs::exists(c.out_dir / "eval" / "sspm" / "ori_L.csv"));
  REQUIRE(!r.dominance.empty());
  CHECK(r.dominance.front().method == "target");
  CHECK(r.dominance.front().dominance_10 == 1.0);
  CHECK(r.losses.size() == 2 * 4);

  const std::string csv = read_text(c.out_dir / "eval" / "metrics.csv");
  CHECK(metrics_csv(parse_metrics_csv(csv)) == csv);
  CHECK(cmd_evaluate(c).metrics.size() == r.metrics.size());
  CHECK(read_text(c.out_dir / "eval" / "metrics.csv") == csv);

  const std::string md = cmd_report(c);
  CHECK(md.find("| ori |") != std::string::npos);
  CHECK(fs::exists(c.out_dir / "report.md"));

  // A missing bank is listed, the rest is still evaluated.
  fs::remove(c.out_dir / "filters" / "fd" / "az090.wav");
  const RunReport broken = cmd_evaluate(c);
  CHECK(broken.metrics.size() == r.metrics.size() - 2);
  bool listed = false;
  for (const auto& f : broken.failures) listed = listed || f.find("az090.wav") != std::string::npos;
  CHECK(listed);
  fs::remove_all(c.out_dir);
}

TEST_CASE("report layout") {
  const std::string empty = render_report({}, {}, {}, {});
  CHECK(empty.find("| Method | nPRQ pre (pos O) | nPRQ pre (avg) | nPRQ post (pos O) | nPRQ post (avg) | SD 11.3kHz (pos O) | "
                   "SD 11.3kHz (avg) | SD 5.65kHz (pos O) | SD 5.65kHz (avg) |") != std::string::npos);

  std::vector<MetricRow> rows;
  auto row = [&](const std::string& m, const std::string& p, double pre, double post, double sd6, double sd5) {
    MetricRow r;
    r.method = m;
    r.position = p;
    r.metrics.nprq.pre = pre;
    r.metrics.nprq.post = post;
    r.metrics.sd.avg6 = sd6;
    r.metrics.sd.avg5 = sd5;
    rows.push_back(r);
  };
  row("a", "O", 1.0, 5.0, 2.0, 3.0);
  row("a", "L", 3.0, 5.0, 2.0, 3.0);
  row("b", "O", 2.0, 4.0, 2.5, 1.0);
  row("b", "L", 2.0, 4.0, 2.5, 1.0);
  const std::string md = render_report({"a", "b"}, rows, {}, {"design b az000: diverged"});
  CHECK(md.find("| a | **1.00** | **2.00** | 5.00 | 5.00 | **2.00** | **2.00** | 3.00 | 3.00 |") != std::string::npos);
  CHECK(md.find("| b | 2.00 | **2.00** | **4.00** | **4.00** | 2.50 | 2.50 | **1.00** | **1.00** |") != std::string::npos);
  CHECK(md.find("- design b az000: diverged") != std::string::npos);
}
