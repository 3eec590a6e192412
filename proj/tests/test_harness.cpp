#include <cmath>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pgrad/harness.hpp"

using namespace pgrad;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("pgrad_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallConfig =
    "algorithm = pgrad\n"
    "steps = 6\n"
    "eval_every = 3\n"
    "batch_size = 16\n"
    "seed = 11\n"
    "dataset = spurious_regression\n"
    "n_domains = 3\n"
    "samples_per_domain = 80\n"
    "shared_dim = 2\n"
    "noise_scale = 0.5\n"
    "model = linear_regression\n";

}  // namespace

TEST_CASE("experiment file parsing") {
  fs::path dir = fresh_dir("parse");
  write_file(dir / "exp.cfg",
             "# comment line\n"
             "algorithm = pgrad-b  # trailing comment\n"
             "steps = 40\n"
             "B = 4\n"
             "k = 2\n"
             "hidden_dims = 8,4\n"
             "model = mlp\n"
             "dataset = rotated_moons\n"
             "n_domains = 5\n"
             "emit = csv\n");
  std::vector<std::string> notices;
  ExperimentConfig cfg = parse_experiment_file((dir / "exp.cfg").string(),
                                               &notices);
  CHECK(cfg.trainer.algorithm == Algorithm::PGradB);
  CHECK(cfg.trainer.steps == 40);
  CHECK(cfg.trainer.B == 4);
  REQUIRE(cfg.trainer.k.has_value());
  CHECK(*cfg.trainer.k == 2);
  CHECK(cfg.trainer.model.hidden_dims == std::vector<std::size_t>{8, 4});
  CHECK(cfg.trainer.dataset.name == "rotated_moons");
  CHECK(cfg.trainer.model.input_dim == 2);   // moons are planar
  CHECK(cfg.trainer.model.output_dim == 2);  // two classes
  CHECK(cfg.emit == "csv");
  CHECK(!notices.empty());  // unset keys are reported

  write_file(dir / "bad.cfg", "algorithm = pgrad\nlearning_rate = 0.1\n");
  CHECK_THROWS_WITH_AS(
      parse_experiment_file((dir / "bad.cfg").string(), nullptr),
      doctest::Contains("learning_rate"), std::invalid_argument);

  write_file(dir / "noeq.cfg", "algorithm pgrad\n");
  CHECK_THROWS_AS(parse_experiment_file((dir / "noeq.cfg").string(), nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_experiment_file((dir / "missing.cfg").string(),
                                        nullptr),
                  std::invalid_argument);
}

TEST_CASE("format_double round-trips the bit pattern") {
  for (double v : {0.1, 1.0 / 3.0, -2.718281828459045e-12, 1e300, 0.0})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("metrics csv round-trips exactly") {
  TrainResult result;
  MetricRow row;
  row.step = 7;
  row.domain_loss = {0.1, 1.0 / 3.0, 2.5e-17};
  row.val_metric = -0.75;
  row.test_metric = 1e-300;
  row.alignment = 0.123456789012345678;
  row.eigenvalues = {2.0, 1e-9};
  row.reference_norm = 3.14159;
  result.table.push_back(row);

  fs::path dir = fresh_dir("roundtrip");
  const std::string path = (dir / "metrics_0.csv").string();
  write_metrics_csv(path, result, 3, 2);
  auto rows = read_metrics_csv(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].step == 7);
  CHECK(rows[0].domain_loss == row.domain_loss);
  CHECK(rows[0].val_metric == row.val_metric);
  CHECK(rows[0].test_metric == row.test_metric);
  CHECK(rows[0].alignment == row.alignment);
  CHECK(rows[0].eigenvalues == row.eigenvalues);
  CHECK(rows[0].reference_norm == row.reference_norm);
}

TEST_CASE("cli run is deterministic and emits the expected files") {
  fs::path dir = fresh_dir("cli_run");
  write_file(dir / "exp.cfg", kSmallConfig);

  fs::path out1 = dir / "run1";
  fs::path out2 = dir / "run2";
  CHECK(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                 out1.string()}) == 0);
  CHECK(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                 out2.string()}) == 0);

  for (const char* name : {"metrics_11.csv", "spectrum_11.csv"}) {
    REQUIRE(fs::exists(out1 / name));
    CHECK(read_file(out1 / name) == read_file(out2 / name));
  }
  REQUIRE(fs::exists(out1 / "summary.json"));
}

TEST_CASE("summary.json aggregates match the per-replicate csvs") {
  fs::path dir = fresh_dir("summary");
  write_file(dir / "exp.cfg", kSmallConfig);
  fs::path out = dir / "run";
  CHECK(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                 out.string(), "--replicates", "3"}) == 0);

  auto summary = nlohmann::json::parse(read_file(out / "summary.json"));
  CHECK(summary["schema_version"] == 1);
  CHECK(summary["config"]["algorithm"] == "pgrad");
  REQUIRE(summary["replicates"].size() == 3);

  std::vector<double> finals;
  for (const auto& rep : summary["replicates"]) {
    const std::uint64_t seed = rep["seed"].get<std::uint64_t>();
    auto rows = read_metrics_csv(
        (out / ("metrics_" + std::to_string(seed) + ".csv")).string());
    REQUIRE(!rows.empty());
    CHECK(rep["final_val"].get<double>() == rows.back().val_metric);
    CHECK(rep["final_test"].get<double>() == rows.back().test_metric);
    finals.push_back(rows.back().val_metric);
  }
  double mean = 0.0;
  for (double v : finals) mean += v / 3.0;
  CHECK(summary["aggregate"]["final_val_mean"].get<double>() ==
        doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("steps override of zero produces a header-only csv") {
  fs::path dir = fresh_dir("zero_steps");
  write_file(dir / "exp.cfg", kSmallConfig);
  fs::path out = dir / "run";
  CHECK(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                 out.string(), "--steps", "0"}) == 0);
  std::string body = read_file(out / "metrics_11.csv");
  CHECK(body.find("step,loss_0") == 0);
  CHECK(body.find('\n') == body.size() - 1);  // header line only
}

TEST_CASE("compare on identical runs yields zero diffs") {
  fs::path dir = fresh_dir("compare");
  write_file(dir / "exp.cfg", kSmallConfig);
  fs::path a = dir / "a", b = dir / "b";
  REQUIRE(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                   a.string()}) == 0);
  REQUIRE(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                   b.string()}) == 0);

  const std::string out_csv = (dir / "cmp.csv").string();
  CHECK(run_cli({"compare", a.string(), b.string(), "--out", out_csv}) == 0);

  std::ifstream in(out_csv);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header.find("val__a") != std::string::npos);
  CHECK(header.find("val__diff_1") != std::string::npos);

  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    REQUIRE(cells.size() == cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i].find("diff") != std::string::npos)
        CHECK(std::stod(cells[i]) == 0.0);
  }
}

TEST_CASE("compare rejects mismatched step grids") {
  fs::path dir = fresh_dir("compare_bad");
  write_file(dir / "exp.cfg", kSmallConfig);
  fs::path a = dir / "a", b = dir / "b";
  REQUIRE(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                   a.string()}) == 0);
  REQUIRE(run_cli({"run", "--config", (dir / "exp.cfg").string(), "--out",
                   b.string(), "--steps", "3"}) == 0);
  CHECK(run_cli({"compare", a.string(), b.string(), "--out",
                 (dir / "cmp.csv").string()}) == 1);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"run"}) == 2);  // --config is required
  CHECK(run_cli({"run", "--config", "/nonexistent/exp.cfg"}) == 2);
  fs::path dir = fresh_dir("usage");
  write_file(dir / "bad.cfg", "unknown_key = 1\n");
  CHECK(run_cli({"run", "--config", (dir / "bad.cfg").string()}) == 2);
}
