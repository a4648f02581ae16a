#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fedgid/model.hpp>
#include <fedgid/rng.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

using namespace fedgid;
namespace fs = std::filesystem;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.in_height = 8;
  a.in_width = 8;
  a.conv_channels = 3;
  a.feature_dim = 6;
  a.num_classes = 4;
  return a;
}

Tensor random_images(const ArchConfig& arch, std::size_t batch,
                     std::uint64_t seed) {
  Tensor x({batch, static_cast<std::size_t>(arch.in_height),
            static_cast<std::size_t>(arch.in_width), 3});
  Rng rng(seed);
  for (auto& v : x.data) v = rng.uniform();
  return x;
}

// loss as a pure function of params, for finite differences
double em_loss(const ModelParams& params, const Tensor& images,
               const std::vector<int>& labels) {
  return softmax_cross_entropy(forward(params, images).logits, labels);
}

}  // namespace

TEST_CASE("init: deterministic, biases zero, fan-in bound respected") {
  auto arch = tiny_arch();
  auto a = init_params(arch, 42);
  auto b = init_params(arch, 42);
  auto c = init_params(arch, 43);
  bool same = true, diff = false;
  auto ta = a.tensors(), tb = b.tensors(), tc = c.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    same = same && ta[i]->data == tb[i]->data;
    diff = diff || ta[i]->data != tc[i]->data;
  }
  CHECK(same);
  CHECK(diff);

  for (double v : a.conv_b.data) CHECK(v == 0.0);
  for (double v : a.fc1_b.data) CHECK(v == 0.0);
  for (double v : a.fc2_b.data) CHECK(v == 0.0);

  const double conv_bound = 1.0 / std::sqrt(3.0 * 5 * 5);
  for (double v : a.conv_w.data) CHECK(std::abs(v) <= conv_bound);
  const double fc1_bound = 1.0 / std::sqrt(static_cast<double>(arch.flat_dim()));
  for (double v : a.fc1_w.data) CHECK(std::abs(v) <= fc1_bound);
  const double fc2_bound = 1.0 / std::sqrt(6.0);
  for (double v : a.fc2_w.data) CHECK(std::abs(v) <= fc2_bound);
}

TEST_CASE("forward: all-zero image with zero biases gives zero activations") {
  auto params = init_params(tiny_arch(), 7);
  Tensor x({2, 8, 8, 3});  // zero-filled
  auto out = forward(params, x);
  for (double v : out.feature_map.data) CHECK(v == 0.0);
  for (double v : out.feature.data) CHECK(v == 0.0);
  for (double v : out.logits.data) CHECK(v == 0.0);  // fc2 bias is zero
}

TEST_CASE("forward: identical images give identical rows; calls are pure") {
  auto arch = tiny_arch();
  auto params = init_params(arch, 11);
  auto single = random_images(arch, 1, 3);
  Tensor dup({2, 8, 8, 3});
  for (std::size_t i = 0; i < single.data.size(); ++i) {
    dup.data[i] = single.data[i];
    dup.data[single.data.size() + i] = single.data[i];
  }
  auto out = forward(params, dup);
  const std::size_t c = arch.num_classes;
  for (std::size_t j = 0; j < c; ++j)
    CHECK(out.logits.data[j] == out.logits.data[c + j]);
  const std::size_t f = arch.feature_dim;
  for (std::size_t j = 0; j < f; ++j)
    CHECK(out.feature.data[j] == out.feature.data[f + j]);

  auto again = forward(params, dup);
  CHECK(again.logits.data == out.logits.data);
  CHECK(again.feature.data == out.feature.data);
  CHECK(again.feature_map.data == out.feature_map.data);
}

TEST_CASE("decomposition: head and tail reproduce the fused forward") {
  auto arch = tiny_arch();
  auto params = init_params(arch, 5);
  auto x = random_images(arch, 3, 9);
  auto out = forward(params, x);
  auto logits2 = classify_feature(params, out.feature);
  CHECK(logits2.data == out.logits.data);
  auto feat2 = encode_feature_map_tail(params, out.feature_map);
  CHECK(feat2.data == out.feature.data);
}

TEST_CASE("classify_feature accepts foreign features with the right shape") {
  auto arch = tiny_arch();
  auto params = init_params(arch, 5);
  Tensor f({4, static_cast<std::size_t>(arch.feature_dim)});
  Rng rng(2);
  for (auto& v : f.data) v = rng.uniform();
  auto logits = classify_feature(params, f);
  REQUIRE(logits.shape ==
          std::vector<std::size_t>{4, static_cast<std::size_t>(arch.num_classes)});
}

TEST_CASE("sgd_step arithmetic") {
  auto arch = tiny_arch();
  auto p = init_params(arch, 1);
  for (auto* t : p.tensors())
    for (auto& v : t->data) v = 1.0;
  auto g = zeros_like(p);

  SUBCASE("p=1, g=1, lr=0.1, wd=0 -> 0.9") {
    for (auto* t : g.tensors())
      for (auto& v : t->data) v = 1.0;
    auto next = sgd_step(p, g, 0.1, 0.0);
    for (auto* t : next.tensors())
      for (double v : t->data) CHECK(v == doctest::Approx(0.9).epsilon(1e-15));
  }
  SUBCASE("p=1, g=0, lr=0.1, wd=0.01 -> 0.999") {
    auto next = sgd_step(p, g, 0.1, 0.01);
    for (auto* t : next.tensors())
      for (double v : t->data) CHECK(v == doctest::Approx(0.999).epsilon(1e-15));
  }
  SUBCASE("non-finite gradient is rejected") {
    g.fc1_w.data[0] = std::nan("");
    CHECK_THROWS_AS(sgd_step(p, g, 0.1, 0.0), std::invalid_argument);
  }
}

TEST_CASE("softmax cross-entropy: analytic values and label checks") {
  Tensor logits({2, 10});  // zeros: uniform distribution over 10 classes
  std::vector<int> labels = {3, 7};
  CHECK(softmax_cross_entropy(logits, labels) ==
        doctest::Approx(std::log(10.0)).epsilon(1e-12));

  // a huge correct-class margin drives the loss toward zero
  Tensor sharp({1, 10});
  sharp.data[4] = 50.0;
  CHECK(softmax_cross_entropy(sharp, {4}) < 1e-15);

  CHECK_THROWS_AS(softmax_cross_entropy(logits, {3}), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {3, 10}), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {3, -1}), std::invalid_argument);
}

TEST_CASE("classification-loss gradient matches central finite differences") {
  auto arch = tiny_arch();
  auto params = init_params(arch, 21);
  auto x = random_images(arch, 3, 33);
  std::vector<int> labels = {0, 2, 3};

  auto out = forward(params, x);
  Tensor dlogits;
  softmax_cross_entropy(out.logits, labels, &dlogits);
  auto grads = zeros_like(params);
  Tensor dfeat = backward_classifier(params, out.feature, dlogits, grads);
  Tensor dmap = backward_tail(params, out.feature_map, out.feature, dfeat, grads);
  backward_conv(params, x, out.feature_map, dmap, grads);

  auto gt = grads.tensors();
  auto pt = params.tensors();
  Rng pick(99);
  int checked = 0;
  for (std::size_t t = 0; t < pt.size(); ++t) {
    const std::size_t n = pt[t]->data.size();
    for (int rep = 0; rep < 12; ++rep) {
      const std::size_t i = pick.below(n);
      const double h = 1e-6;
      ModelParams plus = params, minus = params;
      plus.tensors()[t]->data[i] += h;
      minus.tensors()[t]->data[i] -= h;
      const double fd =
          (em_loss(plus, x, labels) - em_loss(minus, x, labels)) / (2 * h);
      const double an = gt[t]->data[i];
      CHECK(std::abs(an - fd) <= 1e-4 * std::max({1e-6, std::abs(an), std::abs(fd)}));
      ++checked;
    }
  }
  CHECK(checked == 72);
}

TEST_CASE("backward pieces accumulate rather than overwrite") {
  auto arch = tiny_arch();
  auto params = init_params(arch, 2);
  auto x = random_images(arch, 2, 4);
  std::vector<int> labels = {1, 3};
  auto out = forward(params, x);
  Tensor dlogits;
  softmax_cross_entropy(out.logits, labels, &dlogits);

  auto grads1 = zeros_like(params);
  backward_classifier(params, out.feature, dlogits, grads1);
  auto grads2 = zeros_like(params);
  backward_classifier(params, out.feature, dlogits, grads2);
  backward_classifier(params, out.feature, dlogits, grads2);
  for (std::size_t i = 0; i < grads1.fc2_w.data.size(); ++i)
    CHECK(grads2.fc2_w.data[i] == doctest::Approx(2 * grads1.fc2_w.data[i]));
}

TEST_CASE("checkpoint round-trip is bit exact") {
  auto arch = tiny_arch();
  auto params = init_params(arch, 13);
  auto path = (fs::temp_directory_path() / "fedgid_ckpt_rt.fgc").string();
  save_checkpoint(path, params);
  auto loaded = load_checkpoint(path);
  CHECK(loaded.arch == params.arch);
  auto a = params.tensors(), b = loaded.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->data == b[i]->data);
  fs::remove(path);
}

TEST_CASE("arch validation rejects impossible shapes") {
  ArchConfig bad = tiny_arch();
  bad.in_height = 4;  // conv output would be empty
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ArchConfig bad2 = tiny_arch();
  bad2.num_classes = 0;
  CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}
