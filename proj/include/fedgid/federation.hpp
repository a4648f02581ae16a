#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedgid/datagen.hpp"
#include "fedgid/distillation.hpp"
#include "fedgid/intervention.hpp"
#include "fedgid/model.hpp"

namespace fedgid {

enum class Algorithm { kFedAvg, kFedProx, kFedGid };

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

struct TrainConfig {
  int num_rounds = 20;
  int num_clients = 5;
  int local_epochs = 5;
  int batch_size = 64;
  double lr = 0.005;
  double weight_decay = 0.01;
  double sample_fraction = 1.0;  // fraction of clients trained per round
  std::uint64_t seed = 0;
  InterventionConfig intervention;
  DistillConfig distill;
  double beta = 0.1;  // Dirichlet parameter of the partition, kept for reports
  Algorithm algorithm = Algorithm::kFedAvg;
  double fedprox_mu = 0.01;

  void validate() const;
};

// A client's slice of the training set: indices into dataset->images.
struct ClientData {
  const Dataset* dataset = nullptr;
  std::vector<std::size_t> indices;
};

struct ClientRoundMetrics {
  int client_id = 0;
  double loss_em = 0.0;
  double loss_gi = 0.0;
  double loss_gd = 0.0;
  double loss_total = 0.0;
  std::size_t num_samples = 0;  // client dataset size (FedAvg weight)
};

struct RoundReport {
  int round = 0;
  std::vector<ClientRoundMetrics> per_client;  // sorted by client_id
  double global_ood_accuracy = 0.0;
};

struct LocalUpdateResult {
  ModelParams params;
  ClientRoundMetrics metrics;
};

// One client's local phase: copy the received global params and run
// local_epochs of minibatch SGD. fedavg trains on cross-entropy alone;
// fedprox adds the proximal pull toward the received params; fedgid adds the
// intervention loss and lambda-weighted distillation against the frozen
// global encoder. round/client_id only label diagnostics.
LocalUpdateResult local_update(const ModelParams& global_params,
                               const ClientData& data,
                               const TrainConfig& config, std::uint64_t seed,
                               int round, int client_id);

// Weighted per-tensor average; weights are normalized internally.
ModelParams aggregate(const std::vector<ModelParams>& params_list,
                      const std::vector<double>& weights);

// Same, but sums in ascending client-id order so the result is bit-stable
// under permutations of the input.
ModelParams aggregate_by_id(const std::vector<ModelParams>& params_list,
                            const std::vector<double>& weights,
                            const std::vector<int>& client_ids);

// Top-1 accuracy over a dataset (argmax ties resolve to the lowest class).
double evaluate_accuracy(const ModelParams& params, const Dataset& ds);

// Invoked after each round with the fresh report and the aggregated params.
using RoundCallback =
    std::function<void(const RoundReport&, const ModelParams&)>;

struct RunResult {
  std::vector<RoundReport> reports;
  ModelParams initial_params;
  ModelParams final_params;
  // Final local params of the last round's participants, sorted by client id
  // (empty when num_rounds == 0).
  std::vector<int> final_client_ids;
  std::vector<ModelParams> final_client_params;
};

// The full federated loop: broadcast, (sampled) local updates, sample-count
// weighted aggregation, OOD evaluation, one RoundReport per round. on_round,
// when set, sees each report as soon as the round closes. Deterministic in
// config.seed; client execution order never affects results.
RunResult run_experiment(const TrainConfig& config, const Dataset& train,
                         const Dataset& ood_test,
                         const ClientPartition& partition,
                         const RoundCallback& on_round = {});

}  // namespace fedgid
