#include "doctest.h"
#include "oracles.hpp"
#include "severitas/errors.hpp"
#include "severitas/resample.hpp"

using namespace severitas;

namespace {

Dataset points(std::initializer_list<std::pair<std::vector<double>, int>> rows) {
  Dataset d;
  d.width = rows.begin()->first.size();
  for (const auto& [x, y] : rows) d.append(x, y);
  return d;
}

}  // namespace

TEST_CASE("knn_indices") {
  Dataset d = points({{{0, 0}, 0}, {{1, 0}, 0}, {{5, 0}, 0}});
  std::vector<double> q{0.4, 0};
  CHECK(knn_indices(d, q, 2) == std::vector<std::size_t>{0, 1});
  CHECK(knn_indices(d, q, 2) == oracle::exhaustive_knn(d, q, 2));

  SUBCASE("exclude self") {
    auto nn = knn_indices(d, d.row(1), 2, {}, std::size_t{1});
    CHECK(std::find(nn.begin(), nn.end(), 1u) == nn.end());
  }
  SUBCASE("tie goes to the lower index") {
    std::vector<double> mid{0.5, 0};
    CHECK(knn_indices(d, mid, 1) == std::vector<std::size_t>{0});
  }
  SUBCASE("k larger than pool") { CHECK_THROWS_AS(knn_indices(d, q, 4), ArgumentError); }
  SUBCASE("random sets agree with a full scan") {
    Rng rng(17);
    Dataset r = oracle::gaussian_blobs(rng, {40, 40}, 3, 1.0);
    for (std::size_t i = 0; i < r.rows(); ++i) {
      CHECK(knn_indices(r, r.row(i), 5, {}, i) == oracle::exhaustive_knn(r, r.row(i), 5, static_cast<long>(i)));
    }
  }
}

TEST_CASE("smote convex combination") {
  Dataset d = points({{{0, 0}, 1}, {{1, 1}, 1}, {{5, 5}, 0}, {{5, 6}, 0}, {{6, 5}, 0}});
  ResampleConfig cfg;
  cfg.k_smote = 1;
  cfg.target = std::array<std::size_t, 3>{3, 3, 0};
  Rng rng(4);
  auto r = smote_oversample(d, cfg, rng);
  REQUIRE(r.data.rows() == 6);
  CHECK(r.synthesized[1] == 1);
  auto p = r.data.row(5);
  CHECK(p[0] == p[1]);
  CHECK(p[0] >= 0.0);
  CHECK(p[0] < 1.0);
  CHECK(r.data.labels[5] == 1);
}

TEST_CASE("smote reaches the majority count and keeps originals") {
  Rng rng(8);
  Dataset d = oracle::gaussian_blobs(rng, {20, 5}, 2, 3.0);
  ResampleConfig cfg;
  Rng srng(1);
  auto r = smote_oversample(d, cfg, srng);
  CHECK(r.data.class_counts()[0] == 20);
  CHECK(r.data.class_counts()[1] == 20);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    CHECK(std::equal(d.row(i).begin(), d.row(i).end(), r.data.row(i).begin()));
    CHECK(d.labels[i] == r.data.labels[i]);
  }
  for (std::size_t s = 0; s < r.origins.size(); ++s) {
    const auto& o = r.origins[s];
    CHECK(d.labels[o.base] == 1);
    CHECK(d.labels[o.neighbor] == 1);
    CHECK(oracle::segment_deviation(r.data.row(d.rows() + s), d.row(o.base), d.row(o.neighbor)) <= 1e-9);
  }
}

TEST_CASE("smote rejects a singleton class") {
  Dataset d = points({{{0, 0}, 0}, {{1, 0}, 0}, {{2, 0}, 2}});
  Rng rng(1);
  try {
    smote_oversample(d, ResampleConfig{}, rng);
    FAIL("expected throw");
  } catch (const ResampleError& e) {
    CHECK(std::string(e.what()).find("O") != std::string::npos);
  }
}

TEST_CASE("enn_edit") {
  SUBCASE("isolated point is removed") {
    Dataset d = points({{{0, 0}, 0}, {{0.1, 0}, 0}, {{0, 0.1}, 0}, {{0.05, 0.05}, 2}, {{9, 9}, 2}});
    auto r = enn_edit(d, ResampleConfig{});
    CHECK(r.removed == std::vector<std::size_t>{3, 4});
  }
  SUBCASE("separated clusters are untouched") {
    Rng rng(3);
    Dataset d = oracle::gaussian_blobs(rng, {30, 30, 30}, 3, 50.0);
    CHECK(enn_edit(d, ResampleConfig{}).removed.empty());
  }
  SUBCASE("overlapping gaussians match the exhaustive oracle") {
    Rng rng(5);
    Dataset d = oracle::gaussian_blobs(rng, {100, 100}, 2, 1.0);
    auto r = enn_edit(d, ResampleConfig{});
    CHECK(r.removed == oracle::enn_removals(d, 3));
    CHECK(r.data.rows() == d.rows() - r.removed.size());
  }
  SUBCASE("k must be below the sample count") {
    Dataset d = points({{{0}, 0}, {{1}, 0}, {{2}, 1}});
    CHECK_THROWS_AS(enn_edit(d, ResampleConfig{}), ArgumentError);
  }
  SUBCASE("even k rejected") {
    ResampleConfig cfg;
    cfg.k_enn = 4;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  }
}

TEST_CASE("smoteenn") {
  SUBCASE("balanced and separated data is unchanged") {
    Rng rng(2);
    Dataset d = oracle::gaussian_blobs(rng, {25, 25, 25}, 3, 40.0);
    Rng srng(1);
    auto r = smoteenn(d, ResampleConfig{}, srng);
    CHECK(r.data.features == d.features);
    for (const auto& c : r.report.classes) {
      CHECK(c.removed == 0);
      CHECK(c.synthesized == 0);
    }
  }
  SUBCASE("three-class imbalance composes the stage oracles") {
    Rng rng(6);
    Dataset d = oracle::gaussian_blobs(rng, {300, 60, 240}, 4, 2.0);
    ResampleConfig cfg;
    Rng a(77), b(77);
    auto r = smoteenn(d, cfg, a);
    auto smote = smote_oversample(d, cfg, b);
    const auto want_removed = oracle::enn_removals(smote.data, cfg.k_enn);
    std::array<std::size_t, 3> removed{};
    for (std::size_t i : want_removed) ++removed[static_cast<std::size_t>(smote.data.labels[i])];
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(r.report.classes[c].after_smote == 300);
      CHECK(r.report.classes[c].after_enn <= 300);
      CHECK(r.report.classes[c].removed == removed[c]);
      CHECK(r.report.classes[c].after_enn == 300 - removed[c]);
    }
    Rng again(77);
    CHECK(smoteenn(d, cfg, again).data.features == r.data.features);
  }
  SUBCASE("report json layout") {
    ResampleReport rep;
    rep.classes[0].after_enn = 1558;
    rep.classes[1].after_enn = 520;
    rep.classes[2].after_enn = 1489;
    auto j = rep.to_json();
    CHECK(j["KA"]["after_enn"] == 1558);
    CHECK(j["BC"]["after_enn"] == 520);
    CHECK(j["O"]["after_enn"] == 1489);
    for (const char* key : {"before", "after_smote", "after_enn", "removed", "synthesized"}) CHECK(j["KA"].contains(key));
    CHECK(ResampleReport::from_json(j).classes[2].after_enn == 1489);
  }
}

TEST_CASE("enn removals satisfy the vote predicate against pre-pass data") {
  Rng rng(12);
  Dataset d = oracle::gaussian_blobs(rng, {80, 40, 60}, 3, 1.5);
  auto first = enn_edit(d, ResampleConfig{});
  for (std::size_t i : first.removed) {
    int votes[3] = {0, 0, 0};
    for (std::size_t j : oracle::exhaustive_knn(d, d.row(i), 3, static_cast<long>(i))) ++votes[d.labels[j]];
    const int own = votes[d.labels[i]];
    CHECK((votes[0] > own || votes[1] > own || votes[2] > own));
  }
}
