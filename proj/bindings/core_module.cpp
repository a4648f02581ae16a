// fedgid._core: numpy-facing bindings over the C++ library.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "fedgid/analysis.hpp"
#include "fedgid/datagen.hpp"
#include "fedgid/federation.hpp"
#include "fedgid/model.hpp"
#include "fedgid/rng.hpp"

namespace py = pybind11;
using namespace fedgid;

namespace {

using DoubleArray =
    py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const DoubleArray& arr) {
  Tensor t;
  t.shape.assign(arr.shape(), arr.shape() + arr.ndim());
  t.data.assign(arr.data(), arr.data() + arr.size());
  return t;
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> arr(t.shape);
  std::memcpy(arr.mutable_data(), t.ptr(), t.numel() * sizeof(double));
  return arr;
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "ood_test") return Split::kOodTest;
  throw std::invalid_argument("split must be 'train' or 'ood_test'");
}

GiLevel level_from_string(const std::string& s) {
  if (s == "f") return GiLevel::kFeature;
  if (s == "fm") return GiLevel::kFeatureMap;
  throw std::invalid_argument("gi level must be 'f' or 'fm'");
}

std::vector<const LabeledImage*> gather(const Dataset& ds,
                                        const std::vector<std::size_t>& ids) {
  std::vector<const LabeledImage*> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) {
    if (id >= ds.size())
      throw std::out_of_range("image id " + std::to_string(id) +
                              " outside dataset");
    out.push_back(&ds.images[id]);
  }
  return out;
}

py::dict metrics_to_dict(const ClientRoundMetrics& m) {
  py::dict d;
  d["client_id"] = m.client_id;
  d["loss_em"] = m.loss_em;
  d["loss_gi"] = m.loss_gi;
  d["loss_gd"] = m.loss_gd;
  d["loss_total"] = m.loss_total;
  d["num_samples"] = m.num_samples;
  return d;
}

py::dict report_to_dict(const RoundReport& r) {
  py::dict d;
  d["round"] = r.round;
  d["global_ood_accuracy"] = r.global_ood_accuracy;
  py::list clients;
  for (const auto& m : r.per_client) clients.append(metrics_to_dict(m));
  d["clients"] = clients;
  return d;
}

ClientPartition partition_from_lists(
    const std::vector<std::vector<std::size_t>>& assignments, double beta) {
  ClientPartition p;
  p.assignments = assignments;
  p.beta = beta;
  p.num_clients = static_cast<int>(assignments.size());
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "FedGID core: background-intervention federated learning";

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", [](const Dataset& ds) { return ds.size(); })
      .def_property_readonly(
          "height", [](const Dataset& ds) { return ds.spec.height; })
      .def_property_readonly(
          "width", [](const Dataset& ds) { return ds.spec.width; })
      .def_property_readonly(
          "num_classes", [](const Dataset& ds) { return ds.spec.num_classes; })
      .def_property_readonly(
          "split",
          [](const Dataset& ds) {
            return ds.spec.split == Split::kTrain ? "train" : "ood_test";
          })
      .def("labels",
           [](const Dataset& ds) {
             std::vector<int> out(ds.size());
             for (std::size_t i = 0; i < ds.size(); ++i)
               out[i] = ds.images[i].label;
             return out;
           })
      .def("background_color_ids",
           [](const Dataset& ds) {
             std::vector<int> out(ds.size());
             for (std::size_t i = 0; i < ds.size(); ++i)
               out[i] = ds.images[i].background_color_id;
             return out;
           })
      .def("pixels",
           [](const Dataset& ds, std::size_t id) {
             if (id >= ds.size()) throw std::out_of_range("image id");
             return to_array(ds.images[id].pixels);
           })
      .def("bbox",
           [](const Dataset& ds, std::size_t id) {
             if (id >= ds.size()) throw std::out_of_range("image id");
             const Bbox& b = ds.images[id].bbox;
             return py::make_tuple(b.x1, b.y1, b.x2, b.y2);
           })
      .def("image_stack",
           [](const Dataset& ds, const std::vector<std::size_t>& ids) {
             auto batch = gather(ds, ids);
             const std::size_t h = ds.images[0].pixels.dim(0);
             const std::size_t w = ds.images[0].pixels.dim(1);
             Tensor x({ids.size(), h, w, 3});
             const std::size_t stride = h * w * 3;
             for (std::size_t i = 0; i < batch.size(); ++i)
               std::memcpy(x.ptr() + i * stride, batch[i]->pixels.ptr(),
                           stride * sizeof(double));
             return to_array(x);
           })
      .def("measured_correlation",
           [](const Dataset& ds) {
             return measure_background_label_correlation(ds);
           })
      .def("save", [](const Dataset& ds, const std::string& path) {
        save_dataset(path, ds);
      });

  m.def(
      "generate_dataset",
      [](std::size_t count, int num_classes, int height, int width,
         double correlation, const std::string& split, std::uint64_t seed) {
        DatasetSpec spec;
        spec.num_classes = num_classes;
        spec.height = height;
        spec.width = width;
        spec.palette = default_palette(num_classes);
        spec.correlation_strength = correlation;
        spec.split = split_from_string(split);
        spec.seed = seed;
        return generate_dataset(spec, builtin_glyph_corpus(), count);
      },
      py::arg("count"), py::arg("num_classes") = 10, py::arg("height") = 14,
      py::arg("width") = 14, py::arg("correlation") = 0.9,
      py::arg("split") = "train", py::arg("seed") = 0);

  m.def("load_dataset", &load_dataset, py::arg("path"));

  m.def(
      "dirichlet_partition",
      [](const std::vector<int>& labels, int num_clients, double beta,
         std::uint64_t seed) {
        return dirichlet_partition(labels, num_clients, beta, seed).assignments;
      },
      py::arg("labels"), py::arg("num_clients"), py::arg("beta"),
      py::arg("seed"));

  py::class_<ModelParams>(m, "ModelParams")
      .def_property_readonly(
          "tensor_names",
          [](const ModelParams&) {
            return std::vector<std::string>(ModelParams::kTensorNames.begin(),
                                            ModelParams::kTensorNames.end());
          })
      .def("tensor",
           [](const ModelParams& p, const std::string& name) {
             auto ts = p.tensors();
             for (std::size_t i = 0; i < ts.size(); ++i)
               if (name == ModelParams::kTensorNames[i]) return to_array(*ts[i]);
             throw std::invalid_argument("unknown tensor '" + name + "'");
           })
      .def("save", [](const ModelParams& p, const std::string& path) {
        save_checkpoint(path, p);
      });

  m.def(
      "init_params",
      [](int height, int width, int num_classes, std::uint64_t seed) {
        ArchConfig arch;
        arch.in_height = height;
        arch.in_width = width;
        arch.num_classes = num_classes;
        return init_params(arch, seed);
      },
      py::arg("height") = 14, py::arg("width") = 14,
      py::arg("num_classes") = 10, py::arg("seed") = 0);

  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "forward",
      [](const ModelParams& p, const DoubleArray& images) {
        FeatureBundle fb = forward(p, to_tensor(images));
        return py::make_tuple(to_array(fb.feature_map), to_array(fb.feature),
                              to_array(fb.logits));
      },
      py::arg("params"), py::arg("images"),
      "returns (feature_map, feature, logits)");

  m.def(
      "classify_feature",
      [](const ModelParams& p, const DoubleArray& feature) {
        return to_array(classify_feature(p, to_tensor(feature)));
      },
      py::arg("params"), py::arg("feature"));

  m.def(
      "encode_feature_map_tail",
      [](const ModelParams& p, const DoubleArray& feature_map) {
        return to_array(encode_feature_map_tail(p, to_tensor(feature_map)));
      },
      py::arg("params"), py::arg("feature_map"));

  m.def(
      "extract_background",
      [](const Dataset& ds, std::size_t id) {
        if (id >= ds.size()) throw std::out_of_range("image id");
        const LabeledImage& img = ds.images[id];
        return to_array(extract_background(img, img.bbox));
      },
      py::arg("dataset"), py::arg("id"));

  m.def(
      "sample_backgrounds",
      [](const Dataset& ds, const std::vector<std::size_t>& ids,
         std::uint64_t seed) {
        return to_array(sample_backgrounds(gather(ds, ids), seed));
      },
      py::arg("dataset"), py::arg("ids"), py::arg("seed"));

  m.def("background_permutation", &background_permutation, py::arg("n"),
        py::arg("seed"));

  m.def(
      "mix_features",
      [](const DoubleArray& f_i, const DoubleArray& f_b, double alpha) {
        return to_array(mix_features(to_tensor(f_i), to_tensor(f_b), alpha));
      },
      py::arg("f_i"), py::arg("f_b"), py::arg("alpha"));

  m.def(
      "intervention_loss",
      [](const ModelParams& p, const DoubleArray& f_inv,
         const std::vector<int>& labels) {
        return intervention_loss(p, to_tensor(f_inv), labels);
      },
      py::arg("params"), py::arg("f_inv"), py::arg("labels"));

  m.def(
      "feature_kl",
      [](const DoubleArray& s, const DoubleArray& t, double tau) {
        return feature_kl(to_tensor(s), to_tensor(t), tau);
      },
      py::arg("f_student"), py::arg("f_teacher"), py::arg("temperature") = 1.0);

  m.def(
      "gd_loss",
      [](const DoubleArray& fi, const DoubleArray& finv, const DoubleArray& fg,
         double tau) {
        return gd_loss(to_tensor(fi), to_tensor(finv), to_tensor(fg), tau);
      },
      py::arg("f_i"), py::arg("f_inv"), py::arg("f_g"),
      py::arg("temperature") = 1.0);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("num_rounds", &TrainConfig::num_rounds)
      .def_readwrite("num_clients", &TrainConfig::num_clients)
      .def_readwrite("local_epochs", &TrainConfig::local_epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("sample_fraction", &TrainConfig::sample_fraction)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("beta", &TrainConfig::beta)
      .def_readwrite("fedprox_mu", &TrainConfig::fedprox_mu)
      .def_property(
          "algorithm",
          [](const TrainConfig& c) { return algorithm_name(c.algorithm); },
          [](TrainConfig& c, const std::string& s) {
            c.algorithm = algorithm_from_string(s);
          })
      .def_property(
          "gi_enabled",
          [](const TrainConfig& c) { return c.intervention.enabled; },
          [](TrainConfig& c, bool v) { c.intervention.enabled = v; })
      .def_property(
          "alpha", [](const TrainConfig& c) { return c.intervention.alpha; },
          [](TrainConfig& c, double v) { c.intervention.alpha = v; })
      .def_property(
          "gi_level",
          [](const TrainConfig& c) {
            return c.intervention.level == GiLevel::kFeatureMap ? "fm" : "f";
          },
          [](TrainConfig& c, const std::string& s) {
            c.intervention.level = level_from_string(s);
          })
      .def_property(
          "temperature",
          [](const TrainConfig& c) { return c.distill.temperature; },
          [](TrainConfig& c, double v) { c.distill.temperature = v; })
      .def_property(
          "lambda_gd", [](const TrainConfig& c) { return c.distill.lambda_gd; },
          [](TrainConfig& c, double v) { c.distill.lambda_gd = v; });

  m.def(
      "local_update",
      [](const ModelParams& global_params, const Dataset& ds,
         const std::vector<std::size_t>& indices, const TrainConfig& config,
         std::uint64_t seed, int round, int client_id) {
        ClientData data{&ds, indices};
        LocalUpdateResult r = local_update(global_params, data, config, seed,
                                           round, client_id);
        return py::make_tuple(r.params, metrics_to_dict(r.metrics));
      },
      py::arg("global_params"), py::arg("dataset"), py::arg("indices"),
      py::arg("config"), py::arg("seed"), py::arg("round") = 0,
      py::arg("client_id") = 0);

  m.def(
      "aggregate",
      [](const std::vector<ModelParams>& params,
         const std::vector<double>& weights) {
        return aggregate(params, weights);
      },
      py::arg("params_list"), py::arg("weights"));

  m.def("evaluate_accuracy", &evaluate_accuracy, py::arg("params"),
        py::arg("dataset"));

  m.def(
      "run_experiment",
      [](const TrainConfig& config, const Dataset& train, const Dataset& ood,
         const std::vector<std::vector<std::size_t>>& partition) {
        RunResult res;
        {
          py::gil_scoped_release release;
          res = run_experiment(config, train, ood,
                               partition_from_lists(partition, config.beta));
        }
        py::dict out;
        py::list reports;
        for (const auto& r : res.reports) reports.append(report_to_dict(r));
        out["reports"] = reports;
        out["initial_params"] = res.initial_params;
        out["final_params"] = res.final_params;
        py::list client_params;
        for (const auto& p : res.final_client_params) client_params.append(p);
        out["final_client_params"] = client_params;
        out["final_client_ids"] = res.final_client_ids;
        return out;
      },
      py::arg("config"), py::arg("train"), py::arg("ood_test"),
      py::arg("partition"));

  m.def(
      "grad_cam",
      [](const ModelParams& p, const DoubleArray& image) {
        GradCamResult r = grad_cam(p, to_tensor(image));
        py::dict d;
        d["heatmap"] = to_array(r.heatmap);
        d["predicted"] = r.predicted;
        d["degenerate"] = r.degenerate;
        return d;
      },
      py::arg("params"), py::arg("image"));

  m.def(
      "pca_project_2d",
      [](const DoubleArray& features) {
        PcaProjection p = pca_project_2d(to_tensor(features));
        py::dict d;
        d["coords"] = to_array(p.coords);
        d["component_variance"] =
            py::make_tuple(p.component_variance[0], p.component_variance[1]);
        d["degenerate"] = p.degenerate;
        return d;
      },
      py::arg("features"));

  m.def("derive_seed", &derive_seed, py::arg("base"), py::arg("a"),
        py::arg("b") = 0, py::arg("c") = 0);
}
