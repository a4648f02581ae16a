// fedgid: dataset generation, federated runs, ablation sweeps, and the
// analysis exports (Grad-CAM, feature projection, summary tables).

#include <CLI11.hpp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fedgid/analysis.hpp"
#include "fedgid/datagen.hpp"
#include "fedgid/federation.hpp"
#include "fedgid/model.hpp"
#include "fedgid/rng.hpp"
#include "fedgid/run_io.hpp"

namespace {

using namespace fedgid;

constexpr std::uint64_t kPartitionTag = 0x70617274;  // "part"
constexpr std::uint64_t kTrialTag = 0x74726961;      // "tria"

struct GenDataArgs {
  std::string out;
  std::string split = "train";
  std::size_t count = 12000;
  double correlation = 0.9;
  int classes = 10;
  int height = 14;
  int width = 14;
  std::uint64_t seed = 1;
};

struct TrainArgs {
  std::string dataset;
  std::string ood_test;
  std::string out;
  std::string algorithm = "fedavg";
  std::string label;
  int rounds = 20;
  int clients = 5;
  int local_epochs = 5;
  int batch = 64;
  double lr = 0.005;
  double wd = 0.01;
  double sample_fraction = 1.0;
  double alpha = 0.7;
  double lambda = 1.0;
  double tau = 1.0;
  std::string gi_level = "fm";
  bool no_gi = false;
  double beta = 0.1;
  double mu = 0.01;
  std::uint64_t seed = 1;
  int checkpoint_every = 10;
  int trials = 3;  // ablate only
};

struct GradcamArgs {
  std::string checkpoint;
  std::string dataset;
  std::vector<std::size_t> ids;
  std::string out;
};

struct ProjectArgs {
  std::string checkpoint_a;
  std::string checkpoint_b;
  std::string dataset;
  std::vector<std::size_t> ids;
  std::string out;
};

struct ReportArgs {
  std::vector<std::string> runs;
  std::string json_out;
};

GiLevel parse_gi_level(const std::string& s) {
  if (s == "f") return GiLevel::kFeature;
  if (s == "fm") return GiLevel::kFeatureMap;
  throw std::invalid_argument("unknown --gi-level '" + s + "' (use f or fm)");
}

TrainConfig config_from_args(const TrainArgs& a) {
  TrainConfig c;
  c.algorithm = algorithm_from_string(a.algorithm);
  c.num_rounds = a.rounds;
  c.num_clients = a.clients;
  c.local_epochs = a.local_epochs;
  c.batch_size = a.batch;
  c.lr = a.lr;
  c.weight_decay = a.wd;
  c.sample_fraction = a.sample_fraction;
  c.seed = a.seed;
  c.beta = a.beta;
  c.fedprox_mu = a.mu;
  c.intervention.enabled =
      c.algorithm == Algorithm::kFedGid && !a.no_gi;
  c.intervention.alpha = a.alpha;
  c.intervention.level = parse_gi_level(a.gi_level);
  c.distill.temperature = a.tau;
  c.distill.lambda_gd = c.algorithm == Algorithm::kFedGid ? a.lambda : 0.0;
  c.validate();
  return c;
}

void cmd_gen_data(const GenDataArgs& a) {
  DatasetSpec spec;
  spec.num_classes = a.classes;
  spec.height = a.height;
  spec.width = a.width;
  spec.palette = default_palette(a.classes);
  spec.correlation_strength = a.correlation;
  if (a.split == "train") {
    spec.split = Split::kTrain;
  } else if (a.split == "ood_test") {
    spec.split = Split::kOodTest;
  } else {
    throw std::invalid_argument("unknown --split '" + a.split +
                                "' (use train or ood_test)");
  }
  spec.seed = a.seed;

  Dataset ds = generate_dataset(spec, builtin_glyph_corpus(), a.count);
  const std::string path = resolve_run_root(a.out);
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  save_dataset(path, ds);
  std::printf("wrote %zu images to %s\n", ds.size(), path.c_str());
  std::printf("measured background-label correlation: %.4f\n",
              measure_background_label_correlation(ds));
}

void check_compatible(const Dataset& train, const Dataset& ood) {
  if (train.spec.height != ood.spec.height ||
      train.spec.width != ood.spec.width ||
      train.spec.num_classes != ood.spec.num_classes)
    throw std::invalid_argument(
        "train and ood datasets disagree on image size or class count");
}

// One federated run into its own directory; returns the final OOD accuracy.
double run_one(const TrainConfig& config, const std::string& label,
               const Dataset& train, const Dataset& ood,
               const std::string& out_dir, int checkpoint_every,
               bool verbose) {
  ensure_dir(out_dir);
  RunDir dir{out_dir};

  ClientPartition part;
  {
    std::vector<int> labels(train.size());
    for (std::size_t i = 0; i < train.size(); ++i)
      labels[i] = train.images[i].label;
    part = dirichlet_partition(labels, config.num_clients, config.beta,
                               derive_seed(config.seed, kPartitionTag));
  }

  {
    std::ofstream out(dir.config_path(), std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open for writing: " + dir.config_path());
    out << config_to_json(config, label).dump(2) << "\n";
  }

  MetricsWriter metrics(dir.metrics_path());
  RunResult res = run_experiment(
      config, train, ood, part,
      [&](const RoundReport& r, const ModelParams& p) {
        metrics.append(r);
        if (verbose) {
          std::printf("[%s] round %d/%d ood_acc %.4f\n", label.c_str(),
                      r.round + 1, config.num_rounds, r.global_ood_accuracy);
          std::fflush(stdout);
        }
        if (checkpoint_every > 0 && (r.round + 1) % checkpoint_every == 0 &&
            r.round + 1 < config.num_rounds)
          save_checkpoint(dir.checkpoint_path(r.round + 1), p);
      });

  save_checkpoint(dir.final_checkpoint_path(), res.final_params);
  for (std::size_t i = 0; i < res.final_client_params.size(); ++i)
    save_checkpoint(dir.client_checkpoint_path(res.final_client_ids[i]),
                    res.final_client_params[i]);

  const double final_acc = res.reports.empty()
                               ? evaluate_accuracy(res.final_params, ood)
                               : res.reports.back().global_ood_accuracy;
  write_run_summary(dir, RunSummary{label, algorithm_name(config.algorithm),
                                    config.beta, config.seed,
                                    static_cast<int>(res.reports.size()),
                                    final_acc});
  return final_acc;
}

void cmd_run(const TrainArgs& a) {
  TrainConfig config = config_from_args(a);
  Dataset train = load_dataset(a.dataset);
  Dataset ood = load_dataset(a.ood_test);
  check_compatible(train, ood);
  const std::string out_dir = resolve_run_root(a.out);
  const std::string label =
      a.label.empty() ? algorithm_name(config.algorithm) : a.label;
  const double acc = run_one(config, label, train, ood, out_dir,
                             a.checkpoint_every, /*verbose=*/true);
  std::printf("final ood accuracy: %.4f (%s)\n", acc, out_dir.c_str());
}

void cmd_ablate(const TrainArgs& a) {
  Dataset train = load_dataset(a.dataset);
  Dataset ood = load_dataset(a.ood_test);
  check_compatible(train, ood);
  const std::string root = resolve_run_root(a.out);
  ensure_dir(root);

  struct Row {
    const char* label;
    bool gi;
    GiLevel level;
    bool gd;
  };
  const Row rows[] = {
      {"fedavg", false, GiLevel::kFeatureMap, false},
      {"+gd", false, GiLevel::kFeatureMap, true},
      {"+gi_f", true, GiLevel::kFeature, false},
      {"+gi_fm", true, GiLevel::kFeatureMap, false},
      {"+gi_f+gd", true, GiLevel::kFeature, true},
      {"+gi_fm+gd", true, GiLevel::kFeatureMap, true},
  };

  std::vector<std::string> run_dirs;
  for (const Row& row : rows) {
    for (int trial = 0; trial < a.trials; ++trial) {
      TrainArgs ta = a;
      ta.algorithm = std::string(row.label) == "fedavg" ? "fedavg" : "fedgid";
      ta.no_gi = !row.gi;
      ta.gi_level = row.level == GiLevel::kFeature ? "f" : "fm";
      ta.lambda = row.gd ? a.lambda : 0.0;
      // one seed per trial, shared across rows so comparisons are paired
      ta.seed = derive_seed(a.seed, kTrialTag, static_cast<std::uint64_t>(trial));
      TrainConfig config = config_from_args(ta);

      const std::string dir =
          (std::filesystem::path(root) /
           (std::string(row.label) + "_trial" + std::to_string(trial)))
              .string();
      std::printf("=== %s trial %d -> %s\n", row.label, trial, dir.c_str());
      std::fflush(stdout);
      run_one(config, row.label, train, ood, dir, a.checkpoint_every,
              /*verbose=*/false);
      run_dirs.push_back(dir);
    }
  }

  const auto table = summarize_runs(run_dirs);
  const std::string text = format_summary_table(table);
  std::fputs(text.c_str(), stdout);
  {
    std::ofstream out((std::filesystem::path(root) / "summary_table.json").string(),
                      std::ios::binary | std::ios::trunc);
    out << summary_table_to_json(table).dump(2) << "\n";
  }
  {
    std::ofstream out((std::filesystem::path(root) / "summary_table.txt").string(),
                      std::ios::binary | std::ios::trunc);
    out << text;
  }
}

void cmd_gradcam(const GradcamArgs& a) {
  ModelParams params = load_checkpoint(a.checkpoint);
  Dataset ds = load_dataset(a.dataset);
  const std::string out_dir = resolve_run_root(a.out);
  ensure_dir(out_dir);

  std::ofstream records(
      (std::filesystem::path(out_dir) / "predictions.csv").string(),
      std::ios::binary | std::ios::trunc);
  records << "id,predicted,label,degenerate\n";
  for (std::size_t id : a.ids) {
    if (id >= ds.size())
      throw std::runtime_error("unknown image id " + std::to_string(id));
    GradCamResult cam = grad_cam(params, ds.images[id].pixels);
    char name[32];
    std::snprintf(name, sizeof(name), "gradcam_%05zu.pgm", id);
    write_pgm((std::filesystem::path(out_dir) / name).string(), cam.heatmap);
    records << id << "," << cam.predicted << "," << ds.images[id].label << ","
            << (cam.degenerate ? 1 : 0) << "\n";
  }
  std::printf("wrote %zu heatmaps to %s\n", a.ids.size(), out_dir.c_str());
}

void cmd_project_features(const ProjectArgs& a) {
  if (a.ids.size() < 3)
    throw std::invalid_argument("project-features needs at least 3 sample ids");
  ModelParams pa = load_checkpoint(a.checkpoint_a);
  ModelParams pb = load_checkpoint(a.checkpoint_b);
  Dataset ds = load_dataset(a.dataset);
  for (std::size_t id : a.ids)
    if (id >= ds.size())
      throw std::runtime_error("unknown image id " + std::to_string(id));

  const std::size_t n = a.ids.size();
  const std::size_t h = static_cast<std::size_t>(ds.spec.height);
  const std::size_t w = static_cast<std::size_t>(ds.spec.width);
  Tensor x({n, h, w, 3});
  const std::size_t stride = h * w * 3;
  for (std::size_t i = 0; i < n; ++i)
    std::memcpy(x.ptr() + i * stride, ds.images[a.ids[i]].pixels.ptr(),
                stride * sizeof(double));

  Tensor fa = forward(pa, x).feature;
  Tensor fb = forward(pb, x).feature;
  const std::size_t fd = fa.dim(1);
  Tensor all({2 * n, fd});
  std::memcpy(all.ptr(), fa.ptr(), n * fd * sizeof(double));
  std::memcpy(all.ptr() + n * fd, fb.ptr(), n * fd * sizeof(double));

  PcaProjection proj = pca_project_2d(all);

  const std::string out_dir = resolve_run_root(a.out);
  ensure_dir(out_dir);
  {
    std::ofstream out((std::filesystem::path(out_dir) / "coords.csv").string(),
                      std::ios::binary | std::ios::trunc);
    out << "model,id,x,y\n";
    char buf[96];
    for (std::size_t i = 0; i < 2 * n; ++i) {
      const char* model = i < n ? "a" : "b";
      const std::size_t id = a.ids[i % n];
      std::snprintf(buf, sizeof(buf), "%s,%zu,%.17g,%.17g\n", model, id,
                    proj.coords.data[i * 2], proj.coords.data[i * 2 + 1]);
      out << buf;
    }
  }
  std::vector<int> groups(2 * n, 0);
  for (std::size_t i = n; i < 2 * n; ++i) groups[i] = 1;
  write_ppm_scatter((std::filesystem::path(out_dir) / "scatter.ppm").string(),
                    proj.coords, groups, 256);
  if (proj.degenerate)
    std::printf("warning: degenerate projection (features carry no variance)\n");
  std::printf("wrote %zu projected points to %s\n", 2 * n, out_dir.c_str());
}

void cmd_report(const ReportArgs& a) {
  const auto table = summarize_runs(a.runs);
  std::fputs(format_summary_table(table).c_str(), stdout);
  if (!a.json_out.empty()) {
    const std::string path = resolve_run_root(a.json_out);
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) ensure_dir(parent.string());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << summary_table_to_json(table).dump(2) << "\n";
  }
}

void add_train_flags(CLI::App* sub, TrainArgs& a, bool ablate) {
  sub->add_option("--dataset", a.dataset, "training dataset file")->required();
  sub->add_option("--ood-test", a.ood_test, "OOD test dataset file")->required();
  sub->add_option("--out", a.out, "output directory")->required();
  if (!ablate) {
    sub->add_option("--algorithm", a.algorithm,
                    "fedavg | fedprox | fedgid (default fedavg)");
    sub->add_option("--label", a.label, "row label used in reports");
  }
  sub->add_option("--rounds", a.rounds, "communication rounds");
  sub->add_option("--clients", a.clients, "number of clients");
  sub->add_option("--local-epochs", a.local_epochs, "local epochs per round");
  sub->add_option("--batch", a.batch, "minibatch size");
  sub->add_option("--lr", a.lr, "learning rate");
  sub->add_option("--wd", a.wd, "weight decay");
  sub->add_option("--sample-fraction", a.sample_fraction,
                  "fraction of clients trained per round");
  sub->add_option("--alpha", a.alpha, "intervention mixing weight");
  sub->add_option("--lambda", a.lambda, "distillation weight");
  sub->add_option("--tau", a.tau, "distillation temperature");
  if (!ablate) {
    sub->add_option("--gi-level", a.gi_level, "intervention level: f | fm");
    sub->add_flag("--no-gi", a.no_gi,
                  "disable the intervention branch (fedgid only)");
  }
  sub->add_option("--beta", a.beta, "Dirichlet concentration of the partition");
  sub->add_option("--mu", a.mu, "fedprox proximal weight");
  sub->add_option("--seed", a.seed, "run seed");
  sub->add_option("--checkpoint-every", a.checkpoint_every,
                  "checkpoint cadence in rounds (0 = final only)");
  if (ablate) sub->add_option("--trials", a.trials, "trials per configuration");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FedGID: background-intervention federated learning laboratory"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a colorized digit dataset");
  gen->add_option("--out", gen_args.out, "output dataset file")->required();
  gen->add_option("--split", gen_args.split, "train | ood_test");
  gen->add_option("--count", gen_args.count, "number of images");
  gen->add_option("--correlation", gen_args.correlation,
                  "P(background color matches the label), train split only");
  gen->add_option("--classes", gen_args.classes, "number of classes");
  gen->add_option("--height", gen_args.height, "image height");
  gen->add_option("--width", gen_args.width, "image width");
  gen->add_option("--seed", gen_args.seed, "generator seed");

  TrainArgs run_args;
  CLI::App* run = app.add_subcommand("run", "run one federated experiment");
  add_train_flags(run, run_args, /*ablate=*/false);

  TrainArgs ablate_args;
  CLI::App* ablate = app.add_subcommand(
      "ablate", "run the six-configuration component sweep");
  add_train_flags(ablate, ablate_args, /*ablate=*/true);

  GradcamArgs cam_args;
  CLI::App* cam = app.add_subcommand("gradcam", "export Grad-CAM heatmaps");
  cam->add_option("--checkpoint", cam_args.checkpoint, "model checkpoint")->required();
  cam->add_option("--dataset", cam_args.dataset, "dataset file")->required();
  cam->add_option("--ids", cam_args.ids, "image ids")
      ->required()
      ->delimiter(',');
  cam->add_option("--out", cam_args.out, "output directory")->required();

  ProjectArgs proj_args;
  CLI::App* proj = app.add_subcommand(
      "project-features", "project two models' features to 2-D");
  proj->add_option("--checkpoint-a", proj_args.checkpoint_a, "first checkpoint")
      ->required();
  proj->add_option("--checkpoint-b", proj_args.checkpoint_b, "second checkpoint")
      ->required();
  proj->add_option("--dataset", proj_args.dataset, "dataset file")->required();
  proj->add_option("--ids", proj_args.ids, "sample ids (need at least 3)")
      ->required()
      ->delimiter(',');
  proj->add_option("--out", proj_args.out, "output directory")->required();

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "summarize finished runs");
  report->add_option("--runs", report_args.runs, "run directories")
      ->required()
      ->expected(-1);
  report->add_option("--json", report_args.json_out,
                     "also write the table as JSON to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) cmd_gen_data(gen_args);
    if (*run) cmd_run(run_args);
    if (*ablate) cmd_ablate(ablate_args);
    if (*cam) cmd_gradcam(cam_args);
    if (*proj) cmd_project_features(proj_args);
    if (*report) cmd_report(report_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
