#include <benchmark/benchmark.h>

#include <random>

#include <fmt/format.h>

#include "dataloop/apportion.hpp"
#include "dataloop/benchmark.hpp"
#include "dataloop/debugger.hpp"
#include "dataloop/evaluator.hpp"
#include "dataloop/hashing.hpp"
#include "dataloop/statistics.hpp"
#include "dataloop/text.hpp"

using namespace dataloop;

namespace {

std::string words(std::mt19937_64& gen, std::size_t n) {
  std::vector<std::string> w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(fmt::format("w{}", gen() % 50000));
  return text::join(w, " ");
}

void BM_ParseAnswer(benchmark::State& state) {
  const std::vector<std::string> inputs = {
      "B", "The answer is A, C", "Looking at D first, the correct options are ABD.",
      "I would say (B) and (C) but the final answer: C", "none of these"};
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(parse_multi_choice_answer(inputs[i++ % inputs.size()]));
}
BENCHMARK(BM_ParseAnswer);

void BM_ScoreBenchmark(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::vector<BenchmarkItem> items;
  std::vector<Prediction> predictions;
  for (int i = 0; i < state.range(0); ++i) {
    BenchmarkItem item;
    item.item_id = fmt::format("item-{:05d}", i);
    item.question = words(gen, 20);
    item.options = {{"A", "a"}, {"B", "b"}, {"C", "c"}, {"D", "d"}};
    item.answer = gen() % 2 ? std::vector<std::string>{"A", "C"} : std::vector<std::string>{"B"};
    item.cid = fmt::format("{:03d}", gen() % 12);
    items.push_back(item);
    predictions.push_back({item.item_id, gen() % 3 ? "The answer is A, C" : "B"});
  }
  for (auto _ : state) benchmark::DoNotOptimize(score(items, predictions));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreBenchmark)->Arg(1000)->Arg(14072);

void BM_LargestRemainderExact(benchmark::State& state) {
  std::mt19937_64 gen(5);
  std::vector<std::int64_t> weights(static_cast<std::size_t>(state.range(0)));
  for (auto& w : weights) w = static_cast<std::int64_t>(gen() % 5000);
  for (auto _ : state) benchmark::DoNotOptimize(largest_remainder_exact(160000, weights));
}
BENCHMARK(BM_LargestRemainderExact)->Arg(3)->Arg(64)->Arg(1024);

void BM_AllocateQuota(benchmark::State& state) {
  std::map<std::string, std::int64_t> errors;
  for (int i = 0; i < 40; ++i) errors[fmt::format("{:03d}", i)] = 17 + (i * 131) % 400;
  for (auto _ : state) benchmark::DoNotOptimize(allocate_quota(errors, 48000));
}
BENCHMARK(BM_AllocateQuota);

void BM_Orthogonality(benchmark::State& state) {
  std::mt19937_64 gen(7);
  std::vector<BenchmarkItem> items;
  for (int i = 0; i < 500; ++i) {
    BenchmarkItem item;
    item.item_id = fmt::format("item-{:04d}", i);
    item.question = words(gen, 30);
    item.options = {{"A", "a"}, {"B", "b"}, {"C", "c"}, {"D", "d"}};
    item.answer = {"A"};
    item.metadata.chain_id = "chain-" + std::to_string(i);
    items.push_back(item);
  }
  std::vector<TrainingSample> corpus;
  for (int i = 0; i < state.range(0); ++i) {
    TrainingSample s;
    s.sample_id = fmt::format("s{:06d}", i);
    s.question = words(gen, 40);
    s.answer = words(gen, 15);
    s.l2_ids = {"stmt-x"};
    corpus.push_back(s);
  }
  for (auto _ : state) benchmark::DoNotOptimize(check_orthogonality(items, corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Orthogonality)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_Spearman(benchmark::State& state) {
  std::mt19937_64 gen(11);
  std::vector<double> a(static_cast<std::size_t>(state.range(0))), b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<double>(gen() % 100);
    b[i] = a[i] + static_cast<double>(gen() % 40);
  }
  for (auto _ : state) benchmark::DoNotOptimize(spearman_rho(a, b));
}
BENCHMARK(BM_Spearman)->Arg(16)->Arg(1024)->Arg(65536);

void BM_Bootstrap(benchmark::State& state) {
  std::vector<double> v(200);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i % 3 == 0 ? 1.0 : 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(bootstrap_ci(v, 1000, 0.95, 1));
}
BENCHMARK(BM_Bootstrap)->Unit(benchmark::kMillisecond);

void BM_Sha256(benchmark::State& state) {
  const std::string data(static_cast<std::size_t>(state.range(0)), 'x');
  for (auto _ : state) benchmark::DoNotOptimize(sha256_hex(data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(1 << 20);

}  // namespace

BENCHMARK_MAIN();
