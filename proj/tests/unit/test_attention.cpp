#include <cmath>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "reconprobe/attention.hpp"
#include "reconprobe/error.hpp"

using namespace reconprobe;
using fixtures::TempDir;

namespace {

AttentionStack random_stack(const std::string& id, const std::string& variant, PatchGrid grid, int layers, int dim,
                            std::uint64_t seed) {
  std::vector<std::vector<double>> attn, cls;
  for (int l = 0; l < layers; ++l) {
    attn.push_back(fixtures::random_distribution(grid.size(), seed * 31 + l));
    auto e = fixtures::random_distribution(dim, seed * 37 + l);
    e[0] -= 0.5;  // not all-positive
    cls.push_back(e);
  }
  return AttentionStack(id, variant, grid, attn, cls);
}

}  // namespace

TEST_CASE("TVD: plain sum by default, halved on request") {
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0};
  CHECK(attention_tvd(p, q) == doctest::Approx(1.0));
  CHECK(attention_tvd(p, q, TvdConvention{true}) == doctest::Approx(0.5));
  CHECK(attention_tvd(p, p) == 0.0);
  const std::vector<double> a{1.0, 0.0, 0.0}, b{0.0, 0.0, 1.0};
  CHECK(attention_tvd(a, b) == doctest::Approx(2.0));
}

TEST_CASE("TVD input checks") {
  const std::vector<double> p{0.5, 0.5};
  CHECK_THROWS_WITH_AS(attention_tvd(p, std::vector<double>{0.6, 0.6}), doctest::Contains("not normalized"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(attention_tvd(p, std::vector<double>{1.5, -0.5}), doctest::Contains("negative"),
                       ValidationError);
  CHECK_THROWS_WITH_AS(attention_tvd(p, std::vector<double>{1.0}), doctest::Contains("length mismatch"),
                       ValidationError);
  // within the distribution tolerance
  CHECK_NOTHROW(attention_tvd(p, std::vector<double>{0.50004, 0.5}));
}

TEST_CASE("property: TVD is a bounded, symmetric metric") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto p = fixtures::random_distribution(16, seed);
    const auto q = fixtures::random_distribution(16, seed + 1000);
    const auto r = fixtures::random_distribution(16, seed + 2000);
    const double pq = attention_tvd(p, q);
    CHECK(pq >= 0.0);
    CHECK(pq <= 2.0);
    CHECK(pq == attention_tvd(q, p));
    CHECK(pq <= attention_tvd(p, r) + attention_tvd(r, q) + 1e-12);
    CHECK(attention_tvd(p, q, TvdConvention{true}) == doctest::Approx(pq / 2));
  }
}

TEST_CASE("entropy in nats") {
  CHECK(attention_entropy(std::vector<double>(8, 0.125)) == doctest::Approx(std::log(8.0)));
  CHECK(attention_entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
  CHECK(attention_entropy(std::vector<double>{0.25, 0.75}) ==
        doctest::Approx(-(0.25 * std::log(0.25) + 0.75 * std::log(0.75))));
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double h = attention_entropy(fixtures::random_distribution(20, seed));
    CHECK(h >= 0.0);
    CHECK(h <= std::log(20.0) + 1e-12);
  }
}

TEST_CASE("patch mask: exact grid division") {
  // 64x64 image, 4x4 grid, center quarter box covers the middle 2x2 patches
  const auto mask = fixtures::rect_mask(64, 64, 16, 16, 48, 48);
  const auto pm = patch_mask_from_pixel_mask(mask, {4, 4});
  CHECK(pm.count() == 4);
  CHECK(pm.bits == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0});
  // half-covered patches meet a 0.5 threshold but not 0.6
  const auto half = fixtures::rect_mask(64, 64, 0, 0, 8, 64);
  CHECK(patch_mask_from_pixel_mask(half, {4, 4}, 0.5).count() == 4);
  CHECK(patch_mask_from_pixel_mask(half, {4, 4}, 0.6).count() == 0);
}

TEST_CASE("property: patch mask agrees with per-pixel patch assignment") {
  for (auto [h, w, gr, gc] : std::vector<std::array<int, 4>>{{64, 64, 4, 4}, {30, 50, 4, 7}, {17, 23, 5, 3}, {14, 14, 14, 14}})
    for (double t : {0.1, 0.5, 0.75, 1.0})
      for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto mask = fixtures::random_mask(h, w, 0.5, seed + h);
        const auto pm = patch_mask_from_pixel_mask(mask, {gr, gc}, t);
        CHECK(pm.bits == oracle::patch_mask(mask, gr, gc, t));
      }
  CHECK_THROWS_WITH_AS(patch_mask_from_pixel_mask(fixtures::rect_mask(8, 8, 0, 0, 4, 4), {16, 16}),
                       doctest::Contains("grid larger than image"), ValidationError);
}

TEST_CASE("property: inner and outer drift add up to the total") {
  const auto mask = fixtures::rect_mask(64, 64, 16, 16, 48, 48);
  const auto pm = patch_mask_from_pixel_mask(mask, {8, 8});
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto p = fixtures::random_distribution(64, seed);
    const auto q = fixtures::random_distribution(64, seed + 500);
    for (bool halved : {false, true}) {
      const auto s = spatial_tvd(p, q, pm, TvdConvention{halved});
      CHECK(std::abs(s.inner + s.outer - attention_tvd(p, q, TvdConvention{halved})) < 1e-12);
      CHECK(s.inner >= 0.0);
      CHECK(s.outer >= 0.0);
    }
  }
  CHECK_THROWS_AS(spatial_tvd(fixtures::random_distribution(16, 1), fixtures::random_distribution(16, 2), pm),
                  ValidationError);
}

TEST_CASE("CLS cosine") {
  CHECK(cls_cosine(std::vector<double>{1, 0}, std::vector<double>{0, 2}) == doctest::Approx(0.0));
  CHECK(cls_cosine(std::vector<double>{1, 1}, std::vector<double>{2, 2}) == doctest::Approx(1.0));
  CHECK(cls_cosine(std::vector<double>{1, 0}, std::vector<double>{-3, 0}) == doctest::Approx(-1.0));
  CHECK_THROWS_WITH_AS(cls_cosine(std::vector<double>{0, 0}, std::vector<double>{1, 0}),
                       doctest::Contains("zero vector"), ValidationError);
  CHECK_THROWS_AS(cls_cosine(std::vector<double>{1}, std::vector<double>{1, 0}), ValidationError);
}

TEST_CASE("attention stack validation and renormalization") {
  PatchGrid g{1, 2};
  const AttentionStack ok("r", "v", g, {{0.5002, 0.5}}, {{1.0}});
  CHECK(ok.attention(0)[0] + ok.attention(0)[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ok.attention(0)[0] == doctest::Approx(0.5002 / 1.0002));
  CHECK_THROWS_WITH_AS(AttentionStack("r", "v", g, {{0.51, 0.5}}, {{1.0}}), doctest::Contains("sums to"),
                       ValidationError);
  CHECK_THROWS_AS(AttentionStack("r", "v", g, {{1.1, -0.1}}, {{1.0}}), ValidationError);
  CHECK_THROWS_AS(AttentionStack("r", "v", g, {{0.5, 0.5, 0.0}}, {{1.0}}), ValidationError);
  CHECK_THROWS_AS(AttentionStack("r", "v", g, {{0.5, 0.5}, {0.5, 0.5}}, {{1.0}, {1.0, 2.0}}), ValidationError);
  CHECK_THROWS_AS(AttentionStack("r", "v", g, {{0.5, 0.5}}, {}), ValidationError);
}

TEST_CASE("layer profile of a stack against itself") {
  const auto a = random_stack("r", "orig", {4, 4}, 3, 8, 1);
  const auto pm = patch_mask_from_pixel_mask(fixtures::rect_mask(64, 64, 16, 16, 48, 48), {4, 4});
  const auto prof = layer_profile(a, a, pm);
  REQUIRE(prof.layers.size() == 3);
  for (const auto& d : prof.layers) {
    CHECK(d.tvd_total == 0.0);
    CHECK(d.tvd_inner == 0.0);
    CHECK(d.entropy_orig == d.entropy_recon);
    CHECK(d.cls_cosine == doctest::Approx(1.0));
  }
  const auto b = random_stack("r", "SD3-gc", {4, 4}, 3, 8, 2);
  const auto pb = layer_profile(a, b, pm, TvdConvention{true});
  CHECK(pb.variant == "SD3-gc");
  CHECK(pb.layers[1].tvd_total == doctest::Approx(attention_tvd(a.attention(1), b.attention(1), TvdConvention{true})));
  CHECK(pb.layers[2].cls_cosine == doctest::Approx(cls_cosine(a.cls_embedding(2), b.cls_embedding(2))));
  CHECK_THROWS_WITH(layer_profile(a, random_stack("r", "v", {4, 4}, 2, 8, 3), pm), doctest::Contains("layer-count"));
}

TEST_CASE("mean and sample standard deviation") {
  const auto m = mean_std(std::vector<double>{1, 2, 3, 4});
  CHECK(m.mean == 2.5);
  CHECK(m.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_std(std::vector<double>{7}).std == 0.0);
}

TEST_CASE("profile aggregation orders variants and layers") {
  const auto pm = patch_mask_from_pixel_mask(fixtures::rect_mask(64, 64, 16, 16, 48, 48), {4, 4});
  std::vector<LayerDriftProfile> profiles;
  for (const char* variant : {"SD3-gc", "SD1.5-cm"})
    for (int rec = 0; rec < 3; ++rec) {
      const auto o = random_stack("r" + std::to_string(rec), "orig", {4, 4}, 2, 4, 10 + rec);
      const auto v = random_stack("r" + std::to_string(rec), variant, {4, 4}, 2, 4, 20 + rec + variant[2]);
      profiles.push_back(layer_profile(o, v, pm));
    }
  const auto summary = aggregate_profiles(profiles);
  REQUIRE(summary.size() == 4);
  CHECK(summary[0].variant == "SD1.5-cm");
  CHECK(summary[0].layer == 0);
  CHECK(summary[1].layer == 1);
  CHECK(summary[2].variant == "SD3-gc");
  CHECK(summary[0].count == 3);
  std::vector<double> tv;
  for (int i = 3; i < 6; ++i) tv.push_back(profiles[i].layers[0].tvd_total);
  CHECK(summary[0].tvd_total.mean == doctest::Approx(mean_std(tv).mean));
  CHECK(summary[0].tvd_total.std == doctest::Approx(mean_std(tv).std));
}

TEST_CASE("attention interchange round trip") {
  TempDir tmp;
  const auto s = random_stack("r1", "SD3-ld", {3, 5}, 4, 6, 9);
  const auto meta = save_attention_stack(s, tmp.path());
  CHECK(meta == attention_meta_path(tmp.path(), "r1", "SD3-ld"));
  CHECK(std::filesystem::exists(tmp / "r1.SD3-ld.attn.csv"));
  CHECK(std::filesystem::exists(tmp / "r1.SD3-ld.cls.csv"));
  const auto back = load_attention_stack(meta);
  CHECK(back.record_id() == "r1");
  CHECK(back.grid() == PatchGrid{3, 5});
  REQUIRE(back.layers() == 4);
  for (int l = 0; l < 4; ++l) {
    CHECK(std::vector<double>(back.attention(l).begin(), back.attention(l).end()) ==
          std::vector<double>(s.attention(l).begin(), s.attention(l).end()));
    CHECK(std::vector<double>(back.cls_embedding(l).begin(), back.cls_embedding(l).end()) ==
          std::vector<double>(s.cls_embedding(l).begin(), s.cls_embedding(l).end()));
  }
}

TEST_CASE("attention interchange errors") {
  TempDir tmp;
  CHECK_THROWS_AS(load_attention_stack(tmp / "nope.orig.meta.json"), MissingInputError);
  const auto s = random_stack("r1", "orig", {2, 2}, 1, 2, 1);
  const auto meta = save_attention_stack(s, tmp.path());
  std::filesystem::remove(tmp / "r1.orig.cls.csv");
  try {
    load_attention_stack(meta);
    FAIL("missing CLS file accepted");
  } catch (const MissingInputError& e) {
    REQUIRE(e.missing().size() == 1);
    CHECK(e.missing()[0].find("r1.orig.cls.csv") != std::string::npos);
  }
  save_attention_stack(s, tmp.path());
  {
    std::ofstream out(tmp / "r1.orig.attn.csv", std::ios::app);
    out << "0,0,0.25\n";
  }
  CHECK_THROWS_WITH_AS(load_attention_stack(meta), doctest::Contains("duplicate entry"), IoError);
  {
    std::ofstream out(tmp / "r1.orig.attn.csv");
    out << "layer,patch_index,weight\n0,0,0.5\n0,1,0.5\n0,2,0\n";
  }
  CHECK_THROWS_WITH_AS(load_attention_stack(meta), doctest::Contains("missing entry"), IoError);
  {
    std::ofstream out(tmp / "r1.orig.attn.csv");
    out << "layer,patch_index,weight\n0,0,0.5\n0,1,0.5\n0,2,0\n0,9,0\n";
  }
  CHECK_THROWS_WITH_AS(load_attention_stack(meta), doctest::Contains("out of range"), IoError);
}

TEST_CASE("embedding matrix export and import") {
  std::vector<AttentionStack> stacks{random_stack("r1", "orig", {2, 2}, 3, 4, 1),
                                     random_stack("r1", "SD2-cm", {2, 2}, 3, 4, 2)};
  const auto table = export_embedding_matrix(stacks, 2);
  CHECK(table.header == std::vector<std::string>{"record_id", "variant", "d0", "d1", "d2", "d3"});
  const auto rows = import_embedding_matrix(parse_csv(render_csv(table), "mem"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].variant == "SD2-cm");
  CHECK(rows[1].values == std::vector<double>(stacks[1].cls_embedding(2).begin(), stacks[1].cls_embedding(2).end()));
  CHECK(export_embedding_matrix(std::vector<AttentionStack>{}, 0).rows.empty());
  CHECK_THROWS_AS(export_embedding_matrix(stacks, 3), ValidationError);
  CsvTable bad;
  bad.header = {"id", "variant", "d0"};
  CHECK_THROWS_AS(import_embedding_matrix(bad), IoError);
}
