#pragma once

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fedgid/federation.hpp"

namespace fedgid {

// Relative output paths are placed under $FEDGID_RUN_ROOT when it is set;
// absolute paths and unset env pass through unchanged.
std::string resolve_run_root(const std::string& out);

void ensure_dir(const std::string& path);

nlohmann::json config_to_json(const TrainConfig& config,
                              const std::string& label);
TrainConfig config_from_json(const nlohmann::json& j,
                             std::string* label = nullptr);

nlohmann::json round_report_to_json(const RoundReport& report);
RoundReport round_report_from_json(const nlohmann::json& j);

// Fixed file layout inside one run directory.
struct RunDir {
  std::string path;

  std::string config_path() const;
  std::string metrics_path() const;
  std::string summary_path() const;
  std::string checkpoint_path(int round) const;
  std::string final_checkpoint_path() const;
  std::string client_checkpoint_path(int client_id) const;
};

// Appends one JSON line per report; every line is flushed so partial runs
// leave readable metrics behind.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void append(const RoundReport& report);

 private:
  std::ofstream out_;
};

std::vector<RoundReport> read_metrics(const std::string& path);

struct RunSummary {
  std::string label;
  std::string algorithm;
  double beta = 0.0;
  std::uint64_t seed = 0;
  int rounds_completed = 0;
  double final_ood_accuracy = 0.0;
};

void write_run_summary(const RunDir& dir, const RunSummary& summary);
// Throws (naming the directory) when the run never completed.
RunSummary read_run_summary(const std::string& run_dir);

// One row per (label, beta) group, trials in input order.
struct SummaryRow {
  std::string label;
  double beta = 0.0;
  std::vector<double> accuracies;

  double mean() const;
  std::optional<double> stddev() const;  // sample std; empty for one trial
};

std::vector<SummaryRow> summarize_runs(const std::vector<std::string>& dirs);
std::string format_summary_table(const std::vector<SummaryRow>& rows);
nlohmann::json summary_table_to_json(const std::vector<SummaryRow>& rows);

}  // namespace fedgid
