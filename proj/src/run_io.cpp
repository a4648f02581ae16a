#include "fedgid/run_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>

namespace fedgid {

namespace fs = std::filesystem;

std::string resolve_run_root(const std::string& out) {
  const char* root = std::getenv("FEDGID_RUN_ROOT");
  if (root == nullptr || root[0] == '\0') return out;
  fs::path p(out);
  if (p.is_absolute()) return out;
  return (fs::path(root) / p).string();
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw std::runtime_error("cannot create directory " + path + ": " +
                                   ec.message());
}

nlohmann::json config_to_json(const TrainConfig& config,
                              const std::string& label) {
  return nlohmann::json{
      {"label", label},
      {"algorithm", algorithm_name(config.algorithm)},
      {"num_rounds", config.num_rounds},
      {"num_clients", config.num_clients},
      {"local_epochs", config.local_epochs},
      {"batch_size", config.batch_size},
      {"lr", config.lr},
      {"weight_decay", config.weight_decay},
      {"sample_fraction", config.sample_fraction},
      {"seed", config.seed},
      {"beta", config.beta},
      {"fedprox_mu", config.fedprox_mu},
      {"intervention",
       {{"enabled", config.intervention.enabled},
        {"alpha", config.intervention.alpha},
        {"level",
         config.intervention.level == GiLevel::kFeatureMap ? "fm" : "f"}}},
      {"distill",
       {{"temperature", config.distill.temperature},
        {"lambda_gd", config.distill.lambda_gd}}},
  };
}

TrainConfig config_from_json(const nlohmann::json& j, std::string* label) {
  TrainConfig c;
  c.algorithm = algorithm_from_string(j.at("algorithm").get<std::string>());
  c.num_rounds = j.at("num_rounds").get<int>();
  c.num_clients = j.at("num_clients").get<int>();
  c.local_epochs = j.at("local_epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.sample_fraction = j.at("sample_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.beta = j.at("beta").get<double>();
  c.fedprox_mu = j.at("fedprox_mu").get<double>();
  const auto& gi = j.at("intervention");
  c.intervention.enabled = gi.at("enabled").get<bool>();
  c.intervention.alpha = gi.at("alpha").get<double>();
  const std::string level = gi.at("level").get<std::string>();
  if (level == "fm") {
    c.intervention.level = GiLevel::kFeatureMap;
  } else if (level == "f") {
    c.intervention.level = GiLevel::kFeature;
  } else {
    throw std::invalid_argument("config: unknown gi level '" + level + "'");
  }
  const auto& gd = j.at("distill");
  c.distill.temperature = gd.at("temperature").get<double>();
  c.distill.lambda_gd = gd.at("lambda_gd").get<double>();
  if (label != nullptr) *label = j.value("label", algorithm_name(c.algorithm));
  return c;
}

nlohmann::json round_report_to_json(const RoundReport& report) {
  nlohmann::json clients = nlohmann::json::array();
  for (const ClientRoundMetrics& m : report.per_client) {
    clients.push_back({{"id", m.client_id},
                       {"loss_em", m.loss_em},
                       {"loss_gi", m.loss_gi},
                       {"loss_gd", m.loss_gd},
                       {"loss_total", m.loss_total},
                       {"num_samples", m.num_samples}});
  }
  return nlohmann::json{{"round", report.round},
                        {"global_ood_accuracy", report.global_ood_accuracy},
                        {"clients", clients}};
}

RoundReport round_report_from_json(const nlohmann::json& j) {
  RoundReport r;
  r.round = j.at("round").get<int>();
  r.global_ood_accuracy = j.at("global_ood_accuracy").get<double>();
  for (const auto& cj : j.at("clients")) {
    ClientRoundMetrics m;
    m.client_id = cj.at("id").get<int>();
    m.loss_em = cj.at("loss_em").get<double>();
    m.loss_gi = cj.at("loss_gi").get<double>();
    m.loss_gd = cj.at("loss_gd").get<double>();
    m.loss_total = cj.at("loss_total").get<double>();
    m.num_samples = cj.at("num_samples").get<std::size_t>();
    r.per_client.push_back(m);
  }
  return r;
}

std::string RunDir::config_path() const {
  return (fs::path(path) / "config.json").string();
}
std::string RunDir::metrics_path() const {
  return (fs::path(path) / "metrics.jsonl").string();
}
std::string RunDir::summary_path() const {
  return (fs::path(path) / "summary.json").string();
}
std::string RunDir::checkpoint_path(int round) const {
  char name[32];
  std::snprintf(name, sizeof(name), "checkpoint_round_%04d.fgc", round);
  return (fs::path(path) / name).string();
}
std::string RunDir::final_checkpoint_path() const {
  return (fs::path(path) / "checkpoint_final.fgc").string();
}
std::string RunDir::client_checkpoint_path(int client_id) const {
  char name[32];
  std::snprintf(name, sizeof(name), "client_%02d_final.fgc", client_id);
  return (fs::path(path) / name).string();
}

MetricsWriter::MetricsWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
}

void MetricsWriter::append(const RoundReport& report) {
  out_ << round_report_to_json(report).dump() << "\n";
  out_.flush();
  if (!out_) throw std::runtime_error("metrics write failed");
}

std::vector<RoundReport> read_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  std::vector<RoundReport> reports;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw std::runtime_error("bad metrics line " + std::to_string(lineno) +
                               " in " + path);
    reports.push_back(round_report_from_json(j));
  }
  return reports;
}

void write_run_summary(const RunDir& dir, const RunSummary& summary) {
  nlohmann::json j{{"label", summary.label},
                   {"algorithm", summary.algorithm},
                   {"beta", summary.beta},
                   {"seed", summary.seed},
                   {"rounds_completed", summary.rounds_completed},
                   {"final_ood_accuracy", summary.final_ood_accuracy}};
  std::ofstream out(dir.summary_path(), std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + dir.summary_path());
  out << j.dump(2) << "\n";
}

RunSummary read_run_summary(const std::string& run_dir) {
  const RunDir dir{run_dir};
  std::ifstream in(dir.summary_path());
  if (!in)
    throw std::runtime_error("incomplete run directory (no summary): " +
                             run_dir);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded())
    throw std::runtime_error("unreadable summary in " + run_dir);
  RunSummary s;
  s.label = j.at("label").get<std::string>();
  s.algorithm = j.at("algorithm").get<std::string>();
  s.beta = j.at("beta").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.rounds_completed = j.at("rounds_completed").get<int>();
  s.final_ood_accuracy = j.at("final_ood_accuracy").get<double>();
  return s;
}

double SummaryRow::mean() const {
  double sum = 0.0;
  for (double a : accuracies) sum += a;
  return accuracies.empty() ? 0.0 : sum / static_cast<double>(accuracies.size());
}

std::optional<double> SummaryRow::stddev() const {
  if (accuracies.size() < 2) return std::nullopt;
  const double m = mean();
  double ss = 0.0;
  for (double a : accuracies) ss += (a - m) * (a - m);
  return std::sqrt(ss / static_cast<double>(accuracies.size() - 1));
}

std::vector<SummaryRow> summarize_runs(const std::vector<std::string>& dirs) {
  if (dirs.empty())
    throw std::invalid_argument("summarize_runs: no run directories");
  std::vector<SummaryRow> rows;
  for (const std::string& d : dirs) {
    RunSummary s = read_run_summary(d);
    SummaryRow* row = nullptr;
    for (SummaryRow& r : rows)
      if (r.label == s.label && r.beta == s.beta) {
        row = &r;
        break;
      }
    if (row == nullptr) {
      rows.push_back(SummaryRow{s.label, s.beta, {}});
      row = &rows.back();
    }
    row->accuracies.push_back(s.final_ood_accuracy);
  }
  return rows;
}

std::string format_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-14s %-6s %-7s %-10s %-10s\n", "label",
                "beta", "trials", "mean_acc", "std");
  out << line;
  for (const SummaryRow& r : rows) {
    const auto sd = r.stddev();
    char sdbuf[24];
    if (sd.has_value())
      std::snprintf(sdbuf, sizeof(sdbuf), "%.4f", *sd);
    else
      std::snprintf(sdbuf, sizeof(sdbuf), "n/a");
    std::snprintf(line, sizeof(line), "%-14s %-6.2f %-7zu %-10.4f %-10s\n",
                  r.label.c_str(), r.beta, r.accuracies.size(), r.mean(),
                  sdbuf);
    out << line;
  }
  return out.str();
}

nlohmann::json summary_table_to_json(const std::vector<SummaryRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SummaryRow& r : rows) {
    nlohmann::json j{{"label", r.label},
                     {"beta", r.beta},
                     {"trials", r.accuracies.size()},
                     {"mean", r.mean()},
                     {"accuracies", r.accuracies}};
    const auto sd = r.stddev();
    j["std"] = sd.has_value() ? nlohmann::json(*sd) : nlohmann::json(nullptr);
    arr.push_back(j);
  }
  return arr;
}

}  // namespace fedgid
