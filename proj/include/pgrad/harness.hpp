#pragma once

#include <string>
#include <vector>

#include "pgrad/trainer.hpp"

namespace pgrad {

inline constexpr const char* kLibraryVersion = "0.1.0";
inline constexpr int kSummarySchemaVersion = 1;

struct ExperimentConfig {
  TrainerConfig trainer;
  std::size_t replicates = 1;
  std::string out_dir = ".";
  std::string emit = "both";  // csv | json | both
};

/// Parses a flat key=value file ('#' starts a comment). Unknown keys are an
/// error; missing keys keep their defaults and are listed in `notices`.
ExperimentConfig parse_experiment_file(const std::string& path,
                                       std::vector<std::string>* notices);

/// Serializes a double with 17 significant digits so CSV bodies re-parse to
/// the exact bit pattern.
std::string format_double(double v);

std::string metrics_csv_header(std::size_t n_domains,
                               std::size_t trajectory_len);
void write_metrics_csv(const std::string& path, const TrainResult& result,
                       std::size_t n_domains, std::size_t trajectory_len);
std::vector<MetricRow> read_metrics_csv(const std::string& path);

void write_spectrum_csv(const std::string& path, const SpectrumLog& log);

/// `pgrad run --config ...` / `pgrad compare DIR...`. Returns the process
/// exit code: 0 success, 1 runtime failure, 2 usage error.
int run_cli(const std::vector<std::string>& args);

/// Joins the per-step metrics of several completed run directories into one
/// aligned CSV (written to out_path). Throws if the step grids differ.
void compare_runs(const std::vector<std::string>& run_dirs,
                  const std::string& out_path);

}  // namespace pgrad
