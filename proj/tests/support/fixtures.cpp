#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "reconprobe/attention.hpp"
#include "reconprobe/csv.hpp"
#include "reconprobe/hash.hpp"
#include "reconprobe/region.hpp"

namespace fixtures {

using namespace reconprobe;
using json = nlohmann::json;

fs::path fixture_dir() { return RECONPROBE_FIXTURE_DIR; }

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  std::ostringstream name;
  name << tag << "-" << std::hex << rd() << rd();
  path_ = fs::temp_directory_path() / name.str();
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

const std::vector<std::string>& flickr_variants() {
  static const std::vector<std::string> v{"SD1.5-cm", "SD1.5-gc", "SD1.5-ld", "SD2-cm", "SD2-gc",
                                          "SD2-ld",   "SD3-cm",   "SD3-gc",   "SD3-ld"};
  return v;
}

MetricStore load_flickr_fidelity() {
  const CsvTable t = read_csv(fixture_dir() / "flickr_fidelity.csv");
  MetricStore store;
  for (const auto& row : t.rows)
    for (const char* m : {"mse", "psnr", "ssim", "lpips"})
      store.add({std::string(kAggregateScope), row[t.column("variant")], m, parse_double(row[t.column(m)])});
  return store;
}

std::vector<CaptionCell> load_flickr_blip() {
  const CsvTable t = read_csv(fixture_dir() / "flickr_blip_captions.csv");
  std::vector<CaptionCell> out;
  for (const auto& row : t.rows) {
    CaptionCell c{row[0], row[1], parse_double(row[2]), std::nullopt};
    if (!row[3].empty()) c.printed_pct_delta = parse_double(row[3]);
    out.push_back(c);
  }
  return out;
}

MetricStore flickr_blip_store() {
  MetricStore store;
  for (const auto& c : load_flickr_blip()) store.add({std::string(kAggregateScope), c.variant, c.metric, c.value});
  return store;
}

double cell_value(const std::vector<CaptionCell>& cells, const std::string& variant, const std::string& metric) {
  for (const auto& c : cells)
    if (c.variant == variant && c.metric == metric) return c.value;
  throw std::runtime_error("no fixture cell " + variant + "/" + metric);
}

ImageRaster random_image(int height, int width, int channels, PixelScale scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, scale_max(scale));
  ImageRaster img(height, width, channels, scale);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

ImageRaster scene_image(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRaster img(height, width, 3, PixelScale::unit);
  const double gx = u(rng), gy = u(rng);
  struct Disc {
    double r, c, radius, color[3];
  };
  std::vector<Disc> discs;
  for (int i = 0; i < 4; ++i)
    discs.push_back({u(rng) * height, u(rng) * width, 4 + u(rng) * width / 4, {u(rng), u(rng), u(rng)}});
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double v = 0.5 * (gx * r / height + gy * c / width) + 0.1 * ch;
        for (const auto& d : discs)
          if (std::hypot(r - d.r, c - d.c) < d.radius) v = d.color[ch];
        // quantize to 8-bit so PNG round trips are exact
        img.at(r, c, ch) = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
      }
  return img;
}

MaskRaster random_mask(int height, int width, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(density);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(height) * width);
  for (auto& v : bits) v = b(rng) ? 1 : 0;
  bits[static_cast<std::size_t>(rng() % bits.size())] = 1;
  return MaskRaster(height, width, bits);
}

MaskRaster rect_mask(int height, int width, int row0, int col0, int row1, int col1) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(height) * width, 0);
  for (int r = row0; r < row1; ++r)
    for (int c = col0; c < col1; ++c) bits[static_cast<std::size_t>(r) * width + c] = 1;
  return MaskRaster(height, width, bits);
}

std::vector<double> random_distribution(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& v : p) sum += (v = u(rng));
  for (auto& v : p) v /= sum;
  return p;
}

namespace {

const std::vector<std::string> kVocabulary{"a",    "man",   "woman", "dog",  "cat",  "red",    "blue",  "ball",
                                           "park", "runs",  "sits",  "on",   "the",  "grass",  "with",  "small",
                                           "big",  "child", "plays", "near", "tree", "bench",  "water", "jumps"};

std::string sentence(std::mt19937_64& rng, int words) {
  std::string s;
  for (int i = 0; i < words; ++i) s += (i ? " " : "") + kVocabulary[rng() % kVocabulary.size()];
  return s;
}

// Replaces `k` words of `s` with random vocabulary.
std::string perturb(const std::string& s, int k, std::mt19937_64& rng) {
  std::istringstream in(s);
  std::vector<std::string> words{std::istream_iterator<std::string>(in), {}};
  for (int i = 0; i < k && !words.empty(); ++i) words[rng() % words.size()] = kVocabulary[rng() % kVocabulary.size()];
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::vector<double> unit(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (double& x : v) x /= n;
  return v;
}

void append_line(std::string& out, const json& j) { out += j.dump() + "\n"; }

}  // namespace

Project write_project(const fs::path& root, const ProjectOptions& o) {
  Project p;
  p.root = root;
  p.interchange = root / "interchange";
  p.variants = o.variants;
  fs::create_directories(root / "images");
  fs::create_directories(p.interchange);

  const std::vector<json> regions{nullptr,
                                  {{"kind", "bbox"}, {"bbox", {o.side / 8, o.side / 8, o.side * 5 / 8, o.side * 5 / 8}}},
                                  {{"kind", "temporal_band"}}};
  json records = json::array();
  std::map<std::string, std::vector<std::string>> references;
  std::mt19937_64 text_rng(404);
  for (int i = 0; i < o.records; ++i) {
    const std::string id = "r" + std::to_string(i);
    p.record_ids.push_back(id);
    save_image(scene_image(o.side, o.side, 100 + i), root / "images" / (id + ".png"));
    references[id] = {sentence(text_rng, 8), sentence(text_rng, 9)};
    json r = {{"id", id},
              {"original_image", "images/" + id + ".png"},
              {"references", references[id]},
              {"dataset_tag", "flickr"},
              {"prompt", references[id][0]}};
    if (!regions[i % regions.size()].is_null()) r["region"] = regions[i % regions.size()];
    records.push_back(r);
  }
  const json manifest = {{"records", records},
                         {"variants", o.variants},
                         {"settings", {{"pixel_scale", {{"flickr", "unit"}}}, {"degrade", {{"rng_seed", 7}}}}},
                         {"io_roots", {{"images", "."}, {"interchange", "interchange"}, {"reports", "reports"}}}};
  p.manifest = root / "manifest.json";
  write_text_file(p.manifest, manifest.dump(2) + "\n");

  // Reconstructions: the original with a variant-dependent disturbance inside
  // the record's region.
  if (o.recons) {
    for (int i = 0; i < o.records; ++i) {
      const ImageRaster original = load_image(root / "images" / (p.record_ids[i] + ".png"), PixelScale::unit);
      RegionSpec spec = RegionSpec::center(kDefaultCenterAreaFraction);
      if (i % 3 == 1) spec = RegionSpec::box(o.side / 8, o.side / 8, o.side * 5 / 8, o.side * 5 / 8);
      if (i % 3 == 2) spec = RegionSpec::band(kDefaultTemporalStartFraction, kDefaultTemporalLengthFraction);
      const MaskRaster mask = resolve_region(spec, o.side, o.side);
      for (std::size_t v = 0; v < o.variants.size(); ++v) {
        std::mt19937_64 rng(1000 * i + v);
        std::normal_distribution<double> g(0.0, 0.04 + 0.03 * static_cast<double>(v % 4));
        ImageRaster recon = original;
        for (int r = 0; r < o.side; ++r)
          for (int c = 0; c < o.side; ++c)
            if (mask.at(r, c))
              for (int ch = 0; ch < 3; ++ch) recon.at(r, c, ch) = std::clamp(recon.at(r, c, ch) + g(rng), 0.0, 1.0);
        const std::string stem = p.record_ids[i] + "." + o.variants[v];
        save_image(recon, p.interchange / (stem + ".recon.png"));
        const json echo = {{"settings", {{"steps", 50}, {"guidance", 7.5},
                                         {"strength", o.variants[v].rfind("SD3-", 0) == 0 ? 0.6 : 1.0},
                                         {"prompt_max_tokens", 75}}}};
        write_text_file(p.interchange / (stem + ".recon.json"), echo.dump() + "\n");
      }
    }
  }

  if (o.lpips || o.guidance) {
    std::string lpips, guidance;
    const double scales[] = {5.0, 6.0, 7.0, 7.5, 8.0};
    for (int i = 0; i < o.records; ++i)
      for (std::size_t v = 0; v < o.variants.size(); ++v) {
        const double value = 0.1 + 0.02 * static_cast<double>(v % 4) + 0.005 * i;
        append_line(lpips, {{"record_id", p.record_ids[i]}, {"variant", o.variants[v]}, {"metric", "lpips"}, {"value", value}});
        append_line(guidance, {{"record_id", p.record_ids[i]},
                               {"variant", o.variants[v]},
                               {"metric", "guidance_scale"},
                               {"value", scales[v % 5]}});
      }
    if (o.lpips) write_text_file(p.interchange / "scores_lpips.jsonl", lpips);
    if (o.guidance) write_text_file(p.interchange / "scores_guidance.jsonl", guidance);
  }

  if (o.captions) {
    std::string captions, embeddings;
    std::vector<std::string> tags{"orig"};
    tags.insert(tags.end(), o.variants.begin(), o.variants.end());
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    for (const auto& id : p.record_ids) {
      std::vector<std::vector<double>> refs;
      for (std::size_t k = 0; k < references[id].size(); ++k) {
        std::vector<double> v(8);
        for (auto& x : v) x = g(rng);
        refs.push_back(unit(v));
        append_line(embeddings, {{"record_id", id}, {"variant", "ref:" + std::to_string(k)}, {"model_tag", "sbert"}, {"vector", refs.back()}});
      }
      for (std::size_t t = 0; t < tags.size(); ++t) {
        const int damage = t == 0 ? 1 : 1 + static_cast<int>(t % 4);
        json cands = json::array();
        for (int c = 0; c < 3; ++c) cands.push_back(perturb(references[id][c % 2], damage, rng));
        append_line(captions, {{"record_id", id},
                               {"variant", tags[t]},
                               {"candidates", cands},
                               {"settings", {{"beams", 6}, {"top_p", 0.9}, {"temperature", 0.8}, {"candidates", 3}}}});
        for (int c = 0; c < 3; ++c) {
          std::vector<double> v = refs[0];
          for (auto& x : v) x += (0.1 + 0.1 * damage) * g(rng);
          append_line(embeddings, {{"record_id", id}, {"variant", tags[t]}, {"model_tag", "sbert"}, {"candidate", c}, {"vector", unit(v)}});
        }
      }
    }
    write_text_file(p.interchange / "captions.jsonl", captions);
    write_text_file(p.interchange / "embeddings.jsonl", embeddings);
  }

  if (o.paper_captions) {
    std::string lines;
    for (const auto& c : load_flickr_blip())
      append_line(lines, {{"record_id", "*"}, {"variant", c.variant}, {"metric", c.metric}, {"value", c.value}});
    write_text_file(p.interchange / "caption_scores.jsonl", lines);
  }

  if (o.attention) {
    const fs::path dir = p.interchange / "attention";
    const PatchGrid grid{4, 4};
    const int layers = 4, dim = 8;
    for (int i = 0; i < o.records; ++i) {
      std::mt19937_64 rng(500 + i);
      std::normal_distribution<double> g;
      std::vector<std::vector<double>> attn, cls;
      for (int l = 0; l < layers; ++l) {
        attn.push_back(random_distribution(grid.size(), rng()));
        std::vector<double> e(dim);
        for (auto& x : e) x = g(rng);
        cls.push_back(e);
      }
      save_attention_stack(AttentionStack(p.record_ids[i], "orig", grid, attn, cls), dir);
      for (std::size_t v = 0; v < o.variants.size(); ++v) {
        auto a2 = attn;
        auto c2 = cls;
        for (int l = 0; l < layers; ++l) {
          const double eps = 0.05 * (l + 1) * (1.0 + static_cast<double>(v % 3));
          for (int k = 0; k < grid.size(); ++k) {
            const int row = k / grid.cols, col = k % grid.cols;
            const bool center = row >= 1 && row <= 2 && col >= 1 && col <= 2;
            a2[l][k] *= std::exp((center ? eps : 0.2 * eps) * g(rng));
          }
          double s = 0.0;
          for (double x : a2[l]) s += x;
          for (double& x : a2[l]) x /= s;
          for (double& x : c2[l]) x += 0.05 * (l + 1) * g(rng);
        }
        save_attention_stack(AttentionStack(p.record_ids[i], o.variants[v], grid, a2, c2), dir);
      }
    }
  }
  return p;
}

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
  return out;
}

}  // namespace fixtures
