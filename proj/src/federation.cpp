#include "fedgid/federation.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <future>
#include <numeric>
#include <stdexcept>

#include "fedgid/rng.hpp"

namespace fedgid {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;    // "init"
constexpr std::uint64_t kClientTag = 0x636c6e74;  // "clnt"
constexpr std::uint64_t kSampleTag = 0x73616d70;  // "samp"

Tensor stack_images(const std::vector<const LabeledImage*>& batch) {
  const std::size_t h = batch[0]->pixels.dim(0);
  const std::size_t w = batch[0]->pixels.dim(1);
  Tensor out({batch.size(), h, w, 3});
  const std::size_t stride = h * w * 3;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i]->pixels.numel() != stride)
      throw std::invalid_argument("stack_images: mixed image sizes");
    std::memcpy(out.ptr() + i * stride, batch[i]->pixels.ptr(),
                stride * sizeof(double));
  }
  return out;
}

void axpy(Tensor& y, double a, const Tensor& x) {
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += a * x.data[i];
}

std::vector<int> select_clients(const TrainConfig& config, int round) {
  const int k = config.num_clients;
  int m = static_cast<int>(std::llround(config.sample_fraction * k));
  m = std::clamp(m, 1, k);
  std::vector<int> ids(static_cast<std::size_t>(k));
  std::iota(ids.begin(), ids.end(), 0);
  if (m < k) {
    Rng rng(derive_seed(config.seed, kSampleTag,
                        static_cast<std::uint64_t>(round)));
    rng.shuffle(ids);
    ids.resize(static_cast<std::size_t>(m));
    std::sort(ids.begin(), ids.end());
  }
  return ids;
}

}  // namespace

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kFedAvg: return "fedavg";
    case Algorithm::kFedProx: return "fedprox";
    case Algorithm::kFedGid: return "fedgid";
  }
  throw std::logic_error("algorithm_name: bad enum");
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "fedavg") return Algorithm::kFedAvg;
  if (s == "fedprox") return Algorithm::kFedProx;
  if (s == "fedgid") return Algorithm::kFedGid;
  throw std::invalid_argument("unknown algorithm: " + s);
}

void TrainConfig::validate() const {
  if (num_rounds < 0) throw std::invalid_argument("config: num_rounds < 0");
  if (num_clients < 1) throw std::invalid_argument("config: num_clients < 1");
  if (local_epochs < 0) throw std::invalid_argument("config: local_epochs < 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size < 1");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be positive");
  if (weight_decay < 0.0)
    throw std::invalid_argument("config: weight_decay < 0");
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
    throw std::invalid_argument("config: sample_fraction outside (0,1]");
  if (!(intervention.alpha >= 0.0 && intervention.alpha <= 1.0))
    throw std::invalid_argument("config: alpha outside [0,1]");
  if (!(distill.temperature > 0.0))
    throw std::invalid_argument("config: temperature must be positive");
  if (distill.lambda_gd < 0.0)
    throw std::invalid_argument("config: lambda_gd < 0");
  if (fedprox_mu < 0.0) throw std::invalid_argument("config: fedprox_mu < 0");
  if (!(beta > 0.0)) throw std::invalid_argument("config: beta must be positive");
}

LocalUpdateResult local_update(const ModelParams& global_params,
                               const ClientData& data,
                               const TrainConfig& config, std::uint64_t seed,
                               int round, int client_id) {
  config.validate();
  if (data.dataset == nullptr || data.indices.empty())
    throw std::invalid_argument("local_update: empty client data");
  const Dataset& ds = *data.dataset;
  for (std::size_t i : data.indices)
    if (i >= ds.size())
      throw std::invalid_argument("local_update: index outside dataset");

  const bool is_fedgid = config.algorithm == Algorithm::kFedGid;
  const bool gi_on = is_fedgid && config.intervention.enabled;
  const double lambda = is_fedgid ? config.distill.lambda_gd : 0.0;
  const bool gd_on = is_fedgid && lambda > 0.0;
  const bool prox_on = config.algorithm == Algorithm::kFedProx;
  const double alpha = config.intervention.alpha;
  const double tau = config.distill.temperature;
  const bool fm_level = config.intervention.level == GiLevel::kFeatureMap;

  ModelParams local = global_params;
  Rng shuffle_rng(derive_seed(seed, 1));
  Rng bg_rng(derive_seed(seed, 2));

  std::vector<std::size_t> order = data.indices;
  double em_sum = 0.0, gi_sum = 0.0, gd_sum = 0.0, total_sum = 0.0;
  std::size_t seen = 0;

  for (int epoch = 0; epoch < config.local_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size), ++batch_index) {
      const std::size_t n =
          std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                order.size() - start);
      std::vector<const LabeledImage*> batch(n);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        batch[i] = &ds.images[order[start + i]];
        labels[i] = batch[i]->label;
      }
      Tensor x = stack_images(batch);

      FeatureBundle fb = forward(local, x);
      Tensor dlogits;
      const double l_em = softmax_cross_entropy(fb.logits, labels, &dlogits);

      ModelParams grads = zeros_like(local);
      Tensor dfeat = backward_classifier(local, fb.feature, dlogits, grads);

      double l_gi = 0.0, l_gd = 0.0;
      Tensor m_inv, f_inv, df_inv_total;

      if (gi_on) {
        const std::uint64_t bg_seed = bg_rng.next_u64();
        Tensor bg;
        if (n >= 2) {
          bg = sample_backgrounds(batch, bg_seed);
        } else {  // stray singleton batch: pair the image with itself
          Tensor self = extract_background(*batch[0], batch[0]->bbox);
          bg = Tensor({1, self.dim(0), self.dim(1), 3});
          std::memcpy(bg.ptr(), self.ptr(), self.numel() * sizeof(double));
        }
        FeatureBundle gb = forward(global_params, bg);  // frozen E_G
        if (fm_level) {
          m_inv = mix_features(fb.feature_map, gb.feature_map, alpha);
          f_inv = encode_feature_map_tail(local, m_inv);
        } else {
          f_inv = mix_features(fb.feature, gb.feature, alpha);
        }
        l_gi = intervention_loss(local, f_inv, labels, &df_inv_total, &grads);
      }

      if (gd_on) {
        Tensor f_g = forward(global_params, x).feature;  // frozen teacher
        Tensor df_i_gd;
        if (gi_on) {
          Tensor df_inv_gd;
          l_gd = gd_loss(fb.feature, f_inv, f_g, tau, &df_i_gd, &df_inv_gd);
          axpy(df_inv_total, lambda, df_inv_gd);
        } else {
          // Without intervention there is no f_INV; the distillation term
          // keeps only the local-vs-global alignment.
          l_gd = feature_kl(fb.feature, f_g, tau, &df_i_gd);
        }
        axpy(dfeat, lambda, df_i_gd);
      }

      Tensor dm_inv;
      if (gi_on) {
        if (fm_level) {
          dm_inv = backward_tail(local, m_inv, f_inv, df_inv_total, grads);
        } else {
          axpy(dfeat, alpha, df_inv_total);  // d f_inv / d f_i = alpha
        }
      }

      Tensor dmap = backward_tail(local, fb.feature_map, fb.feature, dfeat, grads);
      if (dm_inv.numel() > 0) axpy(dmap, alpha, dm_inv);
      backward_conv(local, x, fb.feature_map, dmap, grads);

      double l_prox = 0.0;
      if (prox_on) {
        auto lt = local.tensors();
        auto gt = global_params.tensors();
        auto grt = grads.tensors();
        for (std::size_t t = 0; t < lt.size(); ++t) {
          for (std::size_t k = 0; k < lt[t]->data.size(); ++k) {
            const double d = lt[t]->data[k] - gt[t]->data[k];
            l_prox += d * d;
            grt[t]->data[k] += config.fedprox_mu * d;
          }
        }
        l_prox *= 0.5 * config.fedprox_mu;
      }

      const double l_total = l_em + l_gi + lambda * l_gd + l_prox;
      if (!std::isfinite(l_total))
        throw std::runtime_error(
            "non-finite loss at round " + std::to_string(round) + " client " +
            std::to_string(client_id) + " batch " + std::to_string(batch_index));

      local = sgd_step(local, grads, config.lr, config.weight_decay);

      const double dn = static_cast<double>(n);
      em_sum += l_em * dn;
      gi_sum += l_gi * dn;
      gd_sum += l_gd * dn;
      total_sum += l_total * dn;
      seen += n;
    }
  }

  LocalUpdateResult out;
  out.params = std::move(local);
  out.metrics.client_id = client_id;
  out.metrics.num_samples = data.indices.size();
  if (seen > 0) {
    const double dn = static_cast<double>(seen);
    out.metrics.loss_em = em_sum / dn;
    out.metrics.loss_gi = gi_sum / dn;
    out.metrics.loss_gd = gd_sum / dn;
    out.metrics.loss_total = total_sum / dn;
  }
  return out;
}

ModelParams aggregate(const std::vector<ModelParams>& params_list,
                      const std::vector<double>& weights) {
  if (params_list.empty())
    throw std::invalid_argument("aggregate: empty params list");
  if (weights.size() != params_list.size())
    throw std::invalid_argument("aggregate: weight count mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("aggregate: weights must be non-negative");
    wsum += w;
  }
  if (!(wsum > 0.0))
    throw std::invalid_argument("aggregate: weights sum to zero");

  ModelParams out = zeros_like(params_list[0]);
  auto dst = out.tensors();
  for (std::size_t i = 0; i < params_list.size(); ++i) {
    if (!params_list[i].same_structure(params_list[0]))
      throw std::invalid_argument("aggregate: structural mismatch");
    const double w = weights[i] / wsum;
    auto src = params_list[i].tensors();
    for (std::size_t t = 0; t < dst.size(); ++t)
      for (std::size_t k = 0; k < dst[t]->data.size(); ++k)
        dst[t]->data[k] += w * src[t]->data[k];
  }
  return out;
}

ModelParams aggregate_by_id(const std::vector<ModelParams>& params_list,
                            const std::vector<double>& weights,
                            const std::vector<int>& client_ids) {
  if (client_ids.size() != params_list.size() ||
      weights.size() != params_list.size())
    throw std::invalid_argument("aggregate_by_id: length mismatch");
  std::vector<std::size_t> order(params_list.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return client_ids[a] < client_ids[b];
  });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (client_ids[order[i]] == client_ids[order[i - 1]])
      throw std::invalid_argument("aggregate_by_id: duplicate client id");
  std::vector<ModelParams> sorted_params;
  std::vector<double> sorted_weights;
  sorted_params.reserve(order.size());
  sorted_weights.reserve(order.size());
  for (std::size_t i : order) {
    sorted_params.push_back(params_list[i]);
    sorted_weights.push_back(weights[i]);
  }
  return aggregate(sorted_params, sorted_weights);
}

double evaluate_accuracy(const ModelParams& params, const Dataset& ds) {
  if (ds.size() == 0)
    throw std::invalid_argument("evaluate_accuracy: empty dataset");
  const std::size_t chunk = 512;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    const std::size_t n = std::min(chunk, ds.size() - start);
    std::vector<const LabeledImage*> batch(n);
    for (std::size_t i = 0; i < n; ++i) batch[i] = &ds.images[start + i];
    Tensor x = stack_images(batch);
    Tensor logits = forward(params, x).logits;
    const std::size_t c = logits.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = logits.ptr() + i * c;
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;
      if (static_cast<int>(best) == batch[i]->label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

RunResult run_experiment(const TrainConfig& config, const Dataset& train,
                         const Dataset& ood_test,
                         const ClientPartition& partition,
                         const RoundCallback& on_round) {
  config.validate();
  if (static_cast<int>(partition.assignments.size()) != config.num_clients)
    throw std::invalid_argument(
        "run_experiment: partition client count does not match config");
  for (const auto& cl : partition.assignments) {
    if (cl.empty())
      throw std::invalid_argument("run_experiment: a client has no data");
    for (std::size_t i : cl)
      if (i >= train.size())
        throw std::invalid_argument(
            "run_experiment: partition index outside dataset");
  }

  ArchConfig arch;
  arch.in_height = train.spec.height;
  arch.in_width = train.spec.width;
  arch.num_classes = train.spec.num_classes;
  arch.validate();

  RunResult result;
  ModelParams global = init_params(arch, derive_seed(config.seed, kInitTag));
  result.initial_params = global;

  for (int round = 0; round < config.num_rounds; ++round) {
    const std::vector<int> selected = select_clients(config, round);
    std::vector<std::future<LocalUpdateResult>> futs;
    futs.reserve(selected.size());
    for (int id : selected) {
      const std::uint64_t cseed =
          derive_seed(config.seed, kClientTag, static_cast<std::uint64_t>(round),
                      static_cast<std::uint64_t>(id));
      futs.push_back(std::async(
          std::launch::async,
          [&global, &train, &partition, &config, cseed, round, id] {
            ClientData cd{&train,
                          partition.assignments[static_cast<std::size_t>(id)]};
            return local_update(global, cd, config, cseed, round, id);
          }));
    }

    std::vector<ModelParams> client_params;
    std::vector<double> weights;
    RoundReport report;
    report.round = round;
    client_params.reserve(futs.size());
    for (auto& fut : futs) {
      LocalUpdateResult r = fut.get();
      report.per_client.push_back(r.metrics);
      weights.push_back(static_cast<double>(r.metrics.num_samples));
      client_params.push_back(std::move(r.params));
    }

    global = aggregate_by_id(client_params, weights, selected);
    report.global_ood_accuracy = evaluate_accuracy(global, ood_test);

    if (round == config.num_rounds - 1) {
      result.final_client_ids = selected;
      result.final_client_params = std::move(client_params);
    }
    result.reports.push_back(std::move(report));
    if (on_round) on_round(result.reports.back(), global);
  }

  result.final_params = std::move(global);
  return result;
}

}  // namespace fedgid
