#include <benchmark/benchmark.h>

#include <random>

#include "reconprobe/caption.hpp"
#include "reconprobe/degrade.hpp"
#include "reconprobe/fidelity.hpp"
#include "reconprobe/stats.hpp"

using namespace reconprobe;

namespace {

ImageRaster noise_image(int side, int channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageRaster img(side, side, channels, PixelScale::unit);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

MaskRaster center_square(int side) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(side) * side, 0);
  for (int r = side / 4; r < 3 * side / 4; ++r)
    for (int c = side / 4; c < 3 * side / 4; ++c) bits[static_cast<std::size_t>(r) * side + c] = 1;
  return MaskRaster(side, side, bits);
}

void BM_Ssim(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto a = noise_image(side, 3, 1), b = noise_image(side, 3, 2);
  const auto mask = center_square(side);
  for (auto _ : state) benchmark::DoNotOptimize(ssim_region(a, b, mask));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256)->Arg(512);

void BM_GaussianBlur(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto img = noise_image(side, 3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_blur(img, 21, 3.5));
}
BENCHMARK(BM_GaussianBlur)->Arg(128)->Arg(512);

void BM_KMeans(benchmark::State& state) {
  const auto img = noise_image(static_cast<int>(state.range(0)), 3, 4);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans_quantize(img.data(), 3, 4, 7));
}
BENCHMARK(BM_KMeans)->Arg(64)->Arg(256);

void BM_LowdimDegrade(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto img = noise_image(side, 3, 5);
  const auto mask = center_square(side);
  DegradeParams params;
  for (auto _ : state) benchmark::DoNotOptimize(lowdim_degrade(img, mask, params));
}
BENCHMARK(BM_LowdimDegrade)->Arg(128)->Arg(512);

void BM_CorpusBleu(benchmark::State& state) {
  std::vector<CaptionSet> corpus;
  const char* words[] = {"a", "man", "dog", "red", "ball", "in", "the", "park", "runs", "with", "blue", "shirt"};
  std::mt19937_64 rng(9);
  const auto sentence = [&] {
    std::string s;
    for (int i = 0; i < 12; ++i) s += std::string(words[rng() % 12]) + " ";
    return s;
  };
  for (int i = 0; i < state.range(0); ++i)
    corpus.push_back({std::to_string(i), "v", {sentence(), sentence(), sentence()}, {sentence(), sentence()}, {}});
  for (auto _ : state) benchmark::DoNotOptimize(bleu_n(corpus, 4));
}
BENCHMARK(BM_CorpusBleu)->Arg(100)->Arg(1000);

void BM_LooStability(benchmark::State& state) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  std::vector<double> xs(static_cast<std::size_t>(state.range(0))), ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xs[i] = g(rng);
    ys[i] = 0.5 * xs[i] + g(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(loo_stability(xs, ys));
}
BENCHMARK(BM_LooStability)->Arg(9)->Arg(1000);

}  // namespace
BENCHMARK_MAIN();
