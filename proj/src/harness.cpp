#include "pgrad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pgrad {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "linear_regression") return ModelKind::LinearRegression;
  if (s == "logistic") return ModelKind::Logistic;
  if (s == "mlp") return ModelKind::Mlp;
  throw std::invalid_argument("unknown model kind: " + s);
}

}  // namespace

ExperimentConfig parse_experiment_file(const std::string& path,
                                       std::vector<std::string>* notices) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);

  ExperimentConfig cfg;
  TrainerConfig& t = cfg.trainer;
  std::vector<std::string> seen;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config:" + std::to_string(lineno) +
                                  ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    seen.push_back(key);

    if (key == "algorithm") t.algorithm = parse_algorithm(val);
    else if (key == "steps") t.steps = std::stoull(val);
    else if (key == "inner_alpha") t.inner_alpha = std::stod(val);
    else if (key == "outer_gamma") t.outer_gamma = std::stod(val);
    else if (key == "scale_gamma_by_n") t.scale_gamma_by_n = (val == "true" || val == "1");
    else if (key == "B") t.B = std::stoull(val);
    else if (key == "k") t.k = std::stoull(val);
    else if (key == "inner_optimizer")
      t.inner_optimizer = (val == "sgd") ? InnerOpt::Sgd : InnerOpt::Adam;
    else if (key == "persist_adam") t.persist_adam = (val == "true" || val == "1");
    else if (key == "mixup_beta") t.mixup_beta = std::stod(val);
    else if (key == "seed") t.seed = std::stoull(val);
    else if (key == "eval_every") t.eval_every = std::stoull(val);
    else if (key == "batch_size") t.batch_size = std::stoull(val);
    else if (key == "model") t.model.kind = parse_model_kind(val);
    else if (key == "hidden_dims") {
      t.model.hidden_dims.clear();
      for (const auto& h : split(val, ','))
        if (!trim(h).empty()) t.model.hidden_dims.push_back(std::stoull(trim(h)));
    }
    else if (key == "activation")
      t.model.activation = (val == "relu") ? Activation::Relu : Activation::Tanh;
    else if (key == "dataset") t.dataset.name = val;
    else if (key == "n_domains") t.dataset.n_domains = std::stoull(val);
    else if (key == "samples_per_domain")
      t.dataset.samples_per_domain = std::stoull(val);
    else if (key == "shared_dim") t.dataset.shared_dim = std::stoull(val);
    else if (key == "noise_scale") t.dataset.noise_scale = std::stod(val);
    else if (key == "rotation_step") t.dataset.rotation_step = std::stod(val);
    else if (key == "label_noise") t.dataset.label_noise = std::stod(val);
    else if (key == "replicates") cfg.replicates = std::stoull(val);
    else if (key == "out_dir") cfg.out_dir = val;
    else if (key == "emit") cfg.emit = val;
    else
      throw std::invalid_argument("config:" + std::to_string(lineno) +
                                  ": unknown key '" + key + "'");
  }
  if (cfg.emit != "csv" && cfg.emit != "json" && cfg.emit != "both")
    throw std::invalid_argument("config: emit must be csv, json, or both");

  apply_dataset_dims(t.dataset, t.model);

  if (notices) {
    const std::vector<std::string> all_keys = {
        "algorithm", "steps", "inner_alpha", "outer_gamma", "scale_gamma_by_n",
        "B", "k", "inner_optimizer", "persist_adam", "mixup_beta", "seed",
        "eval_every", "batch_size", "model", "hidden_dims", "activation",
        "dataset", "n_domains", "samples_per_domain", "shared_dim",
        "noise_scale", "rotation_step", "label_noise", "replicates", "out_dir",
        "emit"};
    for (const auto& key : all_keys)
      if (std::find(seen.begin(), seen.end(), key) == seen.end())
        notices->push_back("config: '" + key + "' not set, using default");
  }
  return cfg;
}

std::string metrics_csv_header(std::size_t n_domains,
                               std::size_t trajectory_len) {
  std::string header = "step";
  for (std::size_t i = 0; i < n_domains; ++i)
    header += ",loss_" + std::to_string(i);
  header += ",val,test,alignment";
  for (std::size_t i = 0; i < trajectory_len; ++i)
    header += ",eig_" + std::to_string(i);
  header += ",ref_norm";
  return header;
}

void write_metrics_csv(const std::string& path, const TrainResult& result,
                       std::size_t n_domains, std::size_t trajectory_len) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << metrics_csv_header(n_domains, trajectory_len) << "\n";
  for (const auto& row : result.table) {
    out << row.step;
    for (double l : row.domain_loss) out << "," << format_double(l);
    out << "," << format_double(row.val_metric) << ","
        << format_double(row.test_metric) << ","
        << format_double(row.alignment);
    for (std::size_t i = 0; i < trajectory_len; ++i)
      out << ","
          << format_double(i < row.eigenvalues.size()
                               ? row.eigenvalues[i]
                               : std::numeric_limits<double>::quiet_NaN());
    out << "," << format_double(row.reference_norm) << "\n";
  }
}

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty metrics file " + path);
  std::size_t n_domains = 0, n_eigs = 0;
  for (const auto& col : split(trim(line), ','))
    if (col.rfind("loss_", 0) == 0) ++n_domains;
    else if (col.rfind("eig_", 0) == 0) ++n_eigs;

  std::vector<MetricRow> rows;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    MetricRow row;
    std::size_t c = 0;
    row.step = std::stoull(cells[c++]);
    for (std::size_t i = 0; i < n_domains; ++i)
      row.domain_loss.push_back(std::stod(cells[c++]));
    row.val_metric = std::stod(cells[c++]);
    row.test_metric = std::stod(cells[c++]);
    row.alignment = std::stod(cells[c++]);
    for (std::size_t i = 0; i < n_eigs; ++i)
      row.eigenvalues.push_back(std::stod(cells[c++]));
    row.reference_norm = std::stod(cells[c++]);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_spectrum_csv(const std::string& path, const SpectrumLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  std::size_t ranks = 0;
  for (const auto& e : log.entries)
    ranks = std::max(ranks, e.mean_contributions.size());
  out << "window_start,window_end";
  for (std::size_t z = 0; z < ranks; ++z) out << ",contrib_" << z;
  out << "\n";
  for (const auto& e : log.entries) {
    out << e.window_start << "," << e.window_end;
    for (std::size_t z = 0; z < ranks; ++z)
      out << ","
          << format_double(z < e.mean_contributions.size()
                               ? e.mean_contributions[z]
                               : 0.0);
    out << "\n";
  }
}

namespace {

struct ReplicateOutcome {
  std::uint64_t seed = 0;
  double final_val = 0.0, final_test = 0.0;
  double best_val = 0.0, best_test = 0.0;
  double loss_variance = 0.0;
};

json config_echo(const ExperimentConfig& cfg) {
  const TrainerConfig& t = cfg.trainer;
  json model{{"kind", t.model.kind == ModelKind::LinearRegression
                          ? "linear_regression"
                          : (t.model.kind == ModelKind::Logistic ? "logistic"
                                                                 : "mlp")},
             {"input_dim", t.model.input_dim},
             {"hidden_dims", t.model.hidden_dims},
             {"output_dim", t.model.output_dim},
             {"activation",
              t.model.activation == Activation::Tanh ? "tanh" : "relu"},
             {"loss", t.model.loss == LossKind::Mse ? "mse" : "cross_entropy"}};
  json dataset{{"name", t.dataset.name},
               {"n_domains", t.dataset.n_domains},
               {"samples_per_domain", t.dataset.samples_per_domain},
               {"shared_dim", t.dataset.shared_dim},
               {"noise_scale", t.dataset.noise_scale},
               {"rotation_step", t.dataset.rotation_step},
               {"label_noise", t.dataset.label_noise}};
  json out{{"algorithm", algorithm_name(t.algorithm)},
           {"steps", t.steps},
           {"inner_alpha", t.inner_alpha},
           {"outer_gamma", t.outer_gamma},
           {"scale_gamma_by_n", t.scale_gamma_by_n},
           {"B", t.B},
           {"inner_optimizer",
            t.inner_optimizer == InnerOpt::Sgd ? "sgd" : "adam"},
           {"persist_adam", t.persist_adam},
           {"mixup_beta", t.mixup_beta},
           {"seed", t.seed},
           {"eval_every", t.eval_every},
           {"batch_size", t.batch_size},
           {"model", model},
           {"dataset", dataset},
           {"replicates", cfg.replicates},
           {"out_dir", cfg.out_dir},
           {"emit", cfg.emit}};
  if (t.k) out["k"] = *t.k;
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double std_dev = xs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return {mean, std_dev};
}

std::size_t replicate_parallelism() {
  if (const char* env = std::getenv("PGRAD_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

int run_experiment(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);

  std::vector<ReplicateOutcome> outcomes(cfg.replicates);
  std::vector<std::string> errors;
  std::mutex err_mutex;
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= cfg.replicates) return;
      try {
        TrainerConfig tc = cfg.trainer;
        tc.seed = cfg.trainer.seed + r;
        TrainResult result = train(tc);
        ReplicateOutcome& o = outcomes[r];
        o.seed = tc.seed;
        if (!result.table.empty()) {
          o.final_val = result.table.back().val_metric;
          o.final_test = result.table.back().test_metric;
          o.best_val = result.table[result.best_row].val_metric;
          o.best_test = result.table[result.best_row].test_metric;
          if (tc.dataset.n_domains >= 2)
            o.loss_variance = variance_summary(result.table);
        }
        if (cfg.emit != "json") {
          const std::string tag = std::to_string(tc.seed);
          write_metrics_csv(cfg.out_dir + "/metrics_" + tag + ".csv", result,
                            tc.dataset.n_domains, result.trajectory_len);
          write_spectrum_csv(cfg.out_dir + "/spectrum_" + tag + ".csv",
                             result.spectrum);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        errors.push_back("replicate " + std::to_string(r) + ": " + e.what());
      }
    }
  };

  const std::size_t n_threads =
      std::min(replicate_parallelism(), cfg.replicates);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
    return 1;
  }

  if (cfg.emit != "csv") {
    json replicates = json::array();
    std::vector<double> finals_val, finals_test, bests_val;
    for (const auto& o : outcomes) {
      replicates.push_back({{"seed", o.seed},
                            {"final_val", o.final_val},
                            {"final_test", o.final_test},
                            {"best_val", o.best_val},
                            {"best_test", o.best_test},
                            {"loss_variance", o.loss_variance}});
      finals_val.push_back(o.final_val);
      finals_test.push_back(o.final_test);
      bests_val.push_back(o.best_val);
    }
    const auto [fv_mean, fv_std] = mean_std(finals_val);
    const auto [ft_mean, ft_std] = mean_std(finals_test);
    const auto [bv_mean, bv_std] = mean_std(bests_val);
    json summary{{"schema_version", kSummarySchemaVersion},
                 {"library_version", kLibraryVersion},
                 {"config", config_echo(cfg)},
                 {"replicates", replicates},
                 {"aggregate",
                  {{"final_val_mean", fv_mean},
                   {"final_val_std", fv_std},
                   {"final_test_mean", ft_mean},
                   {"final_test_std", ft_std},
                   {"best_val_mean", bv_mean},
                   {"best_val_std", bv_std}}}};
    std::ofstream out(cfg.out_dir + "/summary.json");
    if (!out) {
      std::cerr << "error: cannot write summary.json in " << cfg.out_dir
                << "\n";
      return 1;
    }
    out << summary.dump(2) << "\n";
  }
  return 0;
}

std::string first_metrics_file(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("metrics_", 0) == 0 && name.size() > 4 &&
        name.substr(name.size() - 4) == ".csv")
      files.push_back(entry.path().string());
  }
  if (files.empty())
    throw std::runtime_error("no metrics_*.csv in " + dir);
  std::sort(files.begin(), files.end());
  return files.front();
}

double row_loss_variance(const MetricRow& row) {
  const std::size_t n = row.domain_loss.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double l : row.domain_loss) mean += l;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double l : row.domain_loss) var += (l - mean) * (l - mean);
  return var / static_cast<double>(n - 1);
}

}  // namespace

void compare_runs(const std::vector<std::string>& run_dirs,
                  const std::string& out_path) {
  if (run_dirs.size() < 2)
    throw std::invalid_argument("compare: need at least 2 run directories");

  std::vector<std::vector<MetricRow>> tables;
  std::vector<std::string> names;
  for (const auto& dir : run_dirs) {
    tables.push_back(read_metrics_csv(first_metrics_file(dir)));
    names.push_back(fs::path(dir).filename().string());
  }

  std::vector<std::string> offending;
  for (std::size_t i = 1; i < tables.size(); ++i) {
    bool ok = tables[i].size() == tables[0].size();
    for (std::size_t r = 0; ok && r < tables[i].size(); ++r)
      ok = tables[i][r].step == tables[0][r].step;
    if (!ok) offending.push_back(run_dirs[i]);
  }
  if (!offending.empty()) {
    std::string msg = "compare: step grids do not match " + run_dirs[0] + ":";
    for (const auto& d : offending) msg += " " + d;
    throw std::runtime_error(msg);
  }

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  const std::vector<std::string> metrics = {"val", "test", "alignment",
                                            "loss_var"};
  out << "step";
  for (const auto& m : metrics) {
    for (const auto& name : names) out << "," << m << "__" << name;
    for (std::size_t i = 1; i < names.size(); ++i)
      out << "," << m << "__diff_" << i;
  }
  out << "\n";

  auto metric_of = [](const MetricRow& row, const std::string& m) {
    if (m == "val") return row.val_metric;
    if (m == "test") return row.test_metric;
    if (m == "alignment") return row.alignment;
    return row_loss_variance(row);
  };

  for (std::size_t r = 0; r < tables[0].size(); ++r) {
    out << tables[0][r].step;
    for (const auto& m : metrics) {
      for (std::size_t i = 0; i < tables.size(); ++i)
        out << "," << format_double(metric_of(tables[i][r], m));
      for (std::size_t i = 1; i < tables.size(); ++i)
        out << ","
            << format_double(metric_of(tables[i][r], m) -
                             metric_of(tables[0][r], m));
    }
    out << "\n";
  }
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"PGrad multi-domain training harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string algorithm_override, emit_override, out_override;
  long long k_override = -1, b_override = -1, seed_override = -1,
            steps_override = -1, replicates_override = -1;

  CLI::App* run = app.add_subcommand("run", "execute an experiment");
  run->add_option("--config", config_path, "experiment file")->required();
  run->add_option("--algorithm", algorithm_override,
                  "erm|pgrad-f|pgrad|pgrad-b|pgrad-bmix|pgrad-parallel");
  run->add_option("--k", k_override, "retained axes minus one");
  run->add_option("--B", b_override, "sub-batches per domain");
  run->add_option("--seed", seed_override, "base RNG seed");
  run->add_option("--steps", steps_override, "outer steps");
  run->add_option("--out", out_override, "output directory");
  run->add_option("--replicates", replicates_override, "replicate count");
  run->add_option("--emit", emit_override, "csv|json|both")
      ->check(CLI::IsMember({"csv", "json", "both"}));

  std::vector<std::string> compare_dirs;
  std::string compare_out = "comparison.csv";
  CLI::App* cmp = app.add_subcommand("compare", "join completed runs");
  cmp->add_option("dirs", compare_dirs, "run directories")->expected(-2);
  cmp->add_option("--out", compare_out, "output csv path");

  std::vector<const char*> argv;
  argv.push_back("pgrad");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      std::vector<std::string> notices;
      ExperimentConfig cfg;
      try {
        cfg = parse_experiment_file(config_path, &notices);
        if (!algorithm_override.empty())
          cfg.trainer.algorithm = parse_algorithm(algorithm_override);
      } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
      }
      for (const auto& n : notices) std::cerr << "notice: " << n << "\n";
      if (k_override >= 0) cfg.trainer.k = static_cast<std::size_t>(k_override);
      if (b_override > 0) cfg.trainer.B = static_cast<std::size_t>(b_override);
      if (seed_override >= 0)
        cfg.trainer.seed = static_cast<std::uint64_t>(seed_override);
      if (steps_override >= 0)
        cfg.trainer.steps = static_cast<std::size_t>(steps_override);
      if (replicates_override > 0)
        cfg.replicates = static_cast<std::size_t>(replicates_override);
      if (!out_override.empty()) cfg.out_dir = out_override;
      if (!emit_override.empty()) cfg.emit = emit_override;
      return run_experiment(cfg);
    }
    compare_runs(compare_dirs, compare_out);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pgrad
