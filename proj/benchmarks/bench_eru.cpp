// Copyright 2026 The ERU Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include "eru/complexity.hpp"
#include "eru/model.hpp"
#include "eru/pipeline.hpp"
#include "eru/synth_corpus.hpp"

namespace {

using namespace eru;

std::vector<BBox> grid_boxes(std::size_t n) {
  std::vector<BBox> boxes;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 50.0 + static_cast<double>(i % 4) * 220.0, y = 20.0 + static_cast<double>(i / 4) * 11.0;
    boxes.push_back({x, y, x + 200.0, y + 9.0});
  }
  return boxes;
}

// Fusion forward over 2S nodes; cost grows with (2S)^2.
void BM_FusionForward(benchmark::State& state) {
  const auto segments = static_cast<std::size_t>(state.range(0));
  const ModelConfig cfg;
  const Model<float> model(cfg, Vocab(), LabelSchema::default_schema(), 1);
  Rng rng(2);
  const auto x = nn::random_normal<float>({2 * segments, cfg.d_model}, 1.0, rng);
  const auto boxes = grid_boxes(segments);
  for (auto _ : state) {
    nn::Tape<float> tape(nullptr, false);
    const auto out = model.layout().fusion.encode(tape, model.params(), tape.constant(x), boxes);
    benchmark::DoNotOptimize(tape.value(out).data());
  }
  state.SetComplexityN(static_cast<benchmark::IterationCount>(segments));
}
BENCHMARK(BM_FusionForward)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNSquared)->Unit(benchmark::kMillisecond);

// Attention op alone, one block, forward and backward.
void BM_AttentionBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  nn::ParamStore<float> store;
  for (const char* name : {"q", "k", "v"}) store.add(name, nn::random_normal<float>({n, 64}, 1.0, rng));
  for (auto _ : state) {
    nn::Gradients<float> grads(store.size());
    nn::Tape<float> tape(&grads);
    const auto out = tape.attention(tape.param(store, 0), tape.param(store, 1), tape.param(store, 2),
                                    nn::AttentionSpec{4, 0.25, {}});
    tape.backward(tape.sum(out));
    benchmark::DoNotOptimize(grads.get(0));
  }
}
BENCHMARK(BM_AttentionBackward)->Arg(64)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

// One pre-training document: embedding, three objectives, backward.
void BM_PretrainDocument(benchmark::State& state) {
  GenerateOptions g;
  const auto docs = generate_corpus(desk_profile(7), 4, g);
  const ModelConfig cfg;
  const Vocab vocab = Vocab::build(docs, 4000, 1);
  Model<float> model(cfg, vocab, LabelSchema::default_schema(), 1);
  const auto inputs = prepare_inputs(docs, vocab, cfg);
  const PretrainWeights w;
  std::size_t k = 0;
  for (auto _ : state) {
    Rng rng(k);
    const auto& in = inputs[k++ % inputs.size()];
    const MaskPlan plan = make_mask_plan(in, vocab.size(), w, rng);
    nn::Gradients<float> grads(model.params().size());
    nn::Tape<float> tape(&grads);
    const auto g = pretrain_losses(tape, model.layout(), model.params(), in, plan, w);
    tape.backward(g.total);
    benchmark::DoNotOptimize(grads.get(0));
  }
}
BENCHMARK(BM_PretrainDocument)->Unit(benchmark::kMillisecond);

// Analytic cost model, for completeness of the sweep output.
void BM_AnalyticCosts(benchmark::State& state) {
  ComplexityParams p;
  p.tokens = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(analytic_costs(p).ratio);
  state.counters["ratio"] = analytic_costs(p).ratio;
}
BENCHMARK(BM_AnalyticCosts)->Arg(500)->Arg(2000)->Arg(8000);

}  // namespace

BENCHMARK_MAIN();
