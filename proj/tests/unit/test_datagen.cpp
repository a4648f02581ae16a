#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fedgid/datagen.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

using namespace fedgid;
namespace fs = std::filesystem;

namespace {

DatasetSpec base_spec(Split split, double corr, std::uint64_t seed) {
  DatasetSpec s;
  s.palette = default_palette(10);
  s.split = split;
  s.correlation_strength = corr;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("correlation 1.0: background id equals label everywhere") {
  auto ds = generate_dataset(base_spec(Split::kTrain, 1.0, 3),
                             builtin_glyph_corpus(), 500);
  for (const auto& img : ds.images) CHECK(img.background_color_id == img.label);
  CHECK(measure_background_label_correlation(ds) == 1.0);
}

TEST_CASE("ood split: match rate near 1/C") {
  auto ds = generate_dataset(base_spec(Split::kOodTest, 0.9, 11),
                             builtin_glyph_corpus(), 10000);
  // counting oracle: recount matches directly
  std::size_t matches = 0;
  for (const auto& img : ds.images)
    if (img.background_color_id == img.label) ++matches;
  double rate = static_cast<double>(matches) / ds.size();
  CHECK(rate > 0.1 - 0.02);
  CHECK(rate < 0.1 + 0.02);
  CHECK(measure_background_label_correlation(ds) ==
        doctest::Approx(rate).epsilon(1e-12));
}

TEST_CASE("train split: empirical correlation 0.9 within 0.01 at 60k") {
  auto ds = generate_dataset(base_spec(Split::kTrain, 0.9, 29),
                             builtin_glyph_corpus(), 60000);
  std::size_t matches = 0;
  for (const auto& img : ds.images)
    if (img.background_color_id == img.label) ++matches;
  double rate = static_cast<double>(matches) / ds.size();
  CHECK(rate > 0.89);
  CHECK(rate < 0.91);
  CHECK(measure_background_label_correlation(ds) ==
        doctest::Approx(rate).epsilon(1e-12));
}

TEST_CASE("labels cycle through classes; sizes and shapes hold") {
  auto ds = generate_dataset(base_spec(Split::kTrain, 0.9, 1),
                             builtin_glyph_corpus(), 25);
  REQUIRE(ds.size() == 25);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& img = ds.images[i];
    CHECK(img.label == static_cast<int>(i % 10));
    CHECK(img.pixels.dim(0) == 14);
    CHECK(img.pixels.dim(1) == 14);
    CHECK(img.pixels.dim(2) == 3);
    CHECK(img.object_mask.size() == 196);
  }
}

TEST_CASE("background pixels equal the palette color exactly; ink is inside the box") {
  auto spec = base_spec(Split::kTrain, 0.9, 17);
  auto ds = generate_dataset(spec, builtin_glyph_corpus(), 200);
  for (const auto& img : ds.images) {
    const Rgb bg = spec.palette[img.background_color_id];
    bool any_object = false;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const double* px =
            img.pixels.ptr() +
            (static_cast<std::size_t>(y) * img.width() + x) * 3;
        const bool is_bg = px[0] == bg.r && px[1] == bg.g && px[2] == bg.b;
        if (img.mask_at(y, x)) {
          any_object = true;
          // object pixels sit inside the tight bbox
          CHECK(y >= img.bbox.y1);
          CHECK(y <= img.bbox.y2);
          CHECK(x >= img.bbox.x1);
          CHECK(x <= img.bbox.x2);
        } else {
          CHECK(is_bg);
        }
        CHECK(px[0] >= 0.0);
        CHECK(px[0] <= 1.0);
      }
    }
    CHECK(any_object);
    CHECK(img.bbox.width() > 0);
    CHECK(img.bbox.height() > 0);
  }
}

TEST_CASE("bbox is tight around the mask") {
  auto ds = generate_dataset(base_spec(Split::kTrain, 0.9, 23),
                             builtin_glyph_corpus(), 50);
  for (const auto& img : ds.images) {
    int y1 = 99, y2 = -1, x1 = 99, x2 = -1;
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        if (img.mask_at(y, x)) {
          y1 = std::min(y1, y);
          y2 = std::max(y2, y);
          x1 = std::min(x1, x);
          x2 = std::max(x2, x);
        }
    CHECK(img.bbox.x1 == x1);
    CHECK(img.bbox.x2 == x2);
    CHECK(img.bbox.y1 == y1);
    CHECK(img.bbox.y2 == y2);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  auto a = generate_dataset(base_spec(Split::kTrain, 0.9, 5),
                            builtin_glyph_corpus(), 64);
  auto b = generate_dataset(base_spec(Split::kTrain, 0.9, 5),
                            builtin_glyph_corpus(), 64);
  auto c = generate_dataset(base_spec(Split::kTrain, 0.9, 6),
                            builtin_glyph_corpus(), 64);
  REQUIRE(a.size() == b.size());
  bool all_equal = true, any_diff_c = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal = all_equal && a.images[i].pixels.data == b.images[i].pixels.data &&
                a.images[i].background_color_id == b.images[i].background_color_id;
    any_diff_c = any_diff_c || a.images[i].pixels.data != c.images[i].pixels.data;
  }
  CHECK(all_equal);
  CHECK(any_diff_c);
}

TEST_CASE("glyph corpus: ten classes, plausible strokes") {
  auto glyphs = builtin_glyph_corpus();
  REQUIRE(glyphs.size() == 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(glyphs[i].label == i);
    CHECK(glyphs[i].height == 8);
    CHECK(glyphs[i].width == 8);
    double mx = 0;
    for (double v : glyphs[i].intensity) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      mx = std::max(mx, v);
    }
    CHECK(mx == 1.0);  // every glyph has at least one full-strength stroke pixel
  }
}

TEST_CASE("palette: distinct colors in range") {
  auto pal = default_palette(10);
  REQUIRE(pal.size() == 10);
  std::set<std::tuple<double, double, double>> seen;
  for (const auto& c : pal) {
    CHECK(c.r >= 0.0);
    CHECK(c.r <= 1.0);
    seen.insert({c.r, c.g, c.b});
  }
  CHECK(seen.size() == 10);
}

TEST_CASE("partition: every index exactly once") {
  std::vector<int> labels;
  for (int i = 0; i < 997; ++i) labels.push_back(i % 10);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    auto part = dirichlet_partition(labels, 5, 0.1, seed);
    REQUIRE(part.assignments.size() == 5);
    std::vector<int> seen(labels.size(), 0);
    for (const auto& client : part.assignments) {
      CHECK(!client.empty());  // resampling guarantees no empty client
      for (std::size_t idx : client) {
        REQUIRE(idx < labels.size());
        seen[idx] += 1;
      }
      // sorted within client
      for (std::size_t i = 1; i < client.size(); ++i)
        CHECK(client[i - 1] < client[i]);
    }
    for (int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("partition: one class, one client") {
  std::vector<int> labels(40, 3);
  auto part = dirichlet_partition(labels, 1, 0.1, 9);
  REQUIRE(part.assignments.size() == 1);
  CHECK(part.assignments[0].size() == 40);
}

TEST_CASE("partition: huge beta approaches a balanced split") {
  std::vector<int> labels;
  for (int i = 0; i < 50000; ++i) labels.push_back(i % 10);
  auto part = dirichlet_partition(labels, 5, 1e6, 4);
  for (const auto& client : part.assignments) {
    std::map<int, int> hist;
    for (auto idx : client) hist[labels[idx]] += 1;
    const double per_cell = static_cast<double>(client.size()) / 10.0;
    for (const auto& [cls, n] : hist) {
      CHECK(std::abs(n - per_cell) / per_cell < 0.05);
    }
  }
}

TEST_CASE("partition: recorded seeded-sampler oracle (beta 0.1, 5 clients, seed 7)") {
  // frozen reference run over sixty labels cycling 0..9
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % 10);
  auto part = dirichlet_partition(labels, 5, 0.1, 7);
  REQUIRE(part.assignments.size() == 5);
  const std::vector<std::vector<std::size_t>> expect = {
      {2, 4, 5, 7, 14, 17, 22, 24, 26, 27, 32, 34, 35, 36, 37, 42, 44, 45, 47,
       52, 54, 57},
      {0, 1, 3, 6, 8, 9, 10, 11, 13, 15, 18, 20, 21, 23, 25, 28, 29, 30, 31,
       33, 38, 39, 40, 41, 43, 46, 48, 49, 50, 51, 53, 58, 59},
      {12, 19},
      {55},
      {16, 56}};
  CHECK(part.assignments == expect);
}

TEST_CASE("dataset and partition round-trip through files") {
  auto dir = fs::temp_directory_path();
  auto dpath = (dir / "fedgid_ds_rt.fgc").string();
  auto ppath = (dir / "fedgid_part_rt.fgc").string();

  auto ds = generate_dataset(base_spec(Split::kTrain, 0.9, 77),
                             builtin_glyph_corpus(), 10);
  save_dataset(dpath, ds);
  auto rd = load_dataset(dpath);
  REQUIRE(rd.size() == ds.size());
  CHECK(rd.spec.correlation_strength == ds.spec.correlation_strength);
  CHECK(rd.spec.split == ds.spec.split);
  CHECK(rd.spec.num_classes == ds.spec.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(rd.images[i].pixels.data == ds.images[i].pixels.data);
    CHECK(rd.images[i].label == ds.images[i].label);
    CHECK(rd.images[i].object_mask == ds.images[i].object_mask);
    CHECK(rd.images[i].bbox == ds.images[i].bbox);
    CHECK(rd.images[i].background_color_id == ds.images[i].background_color_id);
  }

  std::vector<int> labels;
  for (int i = 0; i < 100; ++i) labels.push_back(i % 10);
  auto part = dirichlet_partition(labels, 5, 0.1, 7);
  save_partition(ppath, part);
  auto rp = load_partition(ppath);
  CHECK(rp.assignments == part.assignments);
  CHECK(rp.beta == part.beta);
  CHECK(rp.num_clients == part.num_clients);
  CHECK(rp.seed == part.seed);

  fs::remove(dpath);
  fs::remove(ppath);
}
