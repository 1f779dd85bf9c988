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

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed here;
// a failing line is reported as such and turns the exit status nonzero.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "../support/checks.hpp"
#include "eru/checkpoint.hpp"
#include "eru/complexity.hpp"
#include "eru/config.hpp"
#include "eru/error.hpp"
#include "eru/finetune.hpp"
#include "eru/parallel.hpp"
#include "eru/pipeline.hpp"
#include "eru/pretrain.hpp"
#include "eru/synth_corpus.hpp"

namespace {

using Clock = std::chrono::steady_clock;
using namespace eru;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

void log(const std::string& line) {
  std::fprintf(stderr, "  .. %s\n", line.c_str());
  std::fflush(stderr);
}

// 1. Analytic gradients against central differences on the tiny double-precision model.
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const auto cases = run_grad_checks(tiny_model_config(), 7, 1e-6);
  const double secs = seconds_since(t0);
  Outcome o{secs < 120.0, ""};
  for (const auto& c : cases) {
    o.pass = o.pass && c.result.max_rel_error <= 1e-3;
    o.detail += fmt("%s %.2e, ", c.name.c_str(), c.result.max_rel_error);
  }
  o.detail += fmt("%.1fs (limits 1e-3, 120s)", secs);
  return o;
}

// 2. Closed-form loss values.
Outcome closed_forms() {
  const double msp = testing::msp_closed_form();
  std::size_t v = 0;
  const double mlm = testing::uniform_mlm_loss(&v);
  const double vpa = testing::uniform_vpa_loss();
  const double acct = testing::pretrain_accounting_error();
  const double mlm_err = std::abs(mlm - std::log(static_cast<double>(v)));
  const double vpa_err = std::abs(vpa - std::log(4.0));
  Outcome o;
  o.pass = std::abs(msp - 0.7944) <= 1e-3 && mlm_err <= 1e-6 && vpa_err <= 1e-6 && acct <= 1e-6;
  o.detail = fmt("MSP %.6f (0.7944+-1e-3), MLM-ln|V| %.1e (|V|=%zu), VPA-ln4 %.1e, L_pre accounting %.1e", msp,
                 mlm_err, v, vpa_err, acct);
  return o;
}

// 3. Structural invariants over 1000 random trials each.
Outcome invariants() {
  const double dev = testing::attention_row_sum_deviation(1000, 31);
  const auto bias = testing::relative_bias_properties(1000, 32);
  const auto plan = testing::mask_plan_violations(1000, 33);
  const std::size_t mirror = testing::vpa_mirror_violations(1000, 34);
  Outcome o;
  o.pass = dev <= 1e-6 && bias.asymmetric == 0 && bias.translation == 0 && plan.total() == 0 && mirror == 0;
  o.detail = fmt("attention |rowsum-1| %.1e, bias asym %zu, translation %zu, plan violations %zu, VPA mirror %zu",
                 dev, bias.asymmetric, bias.translation, plan.total(), mirror);
  return o;
}

// 4. Analytic cost ratio at the reference point and a measured forward-time comparison.
Outcome complexity(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  const AnalyticCosts a = analytic_costs(ComplexityParams{});
  BenchOptions opts = bench_options(cfg.bench, cfg.seed);
  opts.sizes = {2000};
  opts.runs = 5;
  const auto rows = empirical_bench(cfg.model, opts);
  const double secs = seconds_since(t0);
  Outcome o;
  const bool measured = !rows.empty() && rows[0].token_ms > 0.0;
  o.pass = std::abs(a.ratio - 0.0325) <= 5e-4 && a.ratio < 0.1 && measured && rows[0].ratio < 1.0 && secs < 300.0;
  o.detail = fmt("analytic %.4f (~0.0325, <0.1); N=2000 median segment %.1f ms vs token %.1f ms, ratio %.3f; %.0fs",
                 a.ratio, measured ? rows[0].segment_ms : 0.0, measured ? rows[0].token_ms : 0.0,
                 measured ? rows[0].ratio : 0.0, secs);
  return o;
}

struct DeskRun {
  Vocab vocab;
  std::string pretrained;  // checkpoint bytes
  std::vector<ResumeDoc> train, val, test;
  double pretrain_seconds = 0.0;
};

std::vector<ResumeDoc> make_split(const RunConfig& cfg, const char* split, std::size_t n, bool labeled) {
  GenerateOptions g;
  g.split = split;
  g.labeled = labeled;
  g.crop = {cfg.model.crop_height, cfg.model.crop_width, cfg.model.crop_enlarge};
  g.threads = cfg.threads;
  return generate_corpus(profile_by_name(cfg.corpus.profile, cfg.seed), n, g);
}

struct FinetuneOutcome {
  EvalReport test;
  FinetuneResult result;
  double seconds = 0.0;
};

FinetuneOutcome finetune_and_test(Model<float> model, const RunConfig& cfg, const DeskRun& run, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto train = prepare_labeled_set(run.train, model, cfg.threads);
  const auto val = prepare_labeled_set(run.val, model, cfg.threads);
  const auto test = prepare_labeled_set(run.test, model, cfg.threads);
  FinetuneOptions opts{cfg.finetune, seed, cfg.threads, {}};
  opts.on_epoch = [](const FinetuneRecord& r) {
    log(fmt("epoch %zu L_f %.3f val micro-F1 %.4f", r.epoch, r.terms.total, r.val_micro_f1));
  };
  FinetuneOutcome out;
  out.result = train_finetune(model, train, val, opts);
  out.test = evaluate_inputs(model, test, cfg.threads);
  out.seconds = seconds_since(t0);
  return out;
}

// 5. Desk-scale pre-training then fine-tuning; held-out micro-F1 and wall time.
Outcome end_to_end(const RunConfig& cfg, DeskRun& run, std::optional<FinetuneOutcome>& first) {
  const auto t0 = Clock::now();
  std::vector<DocInputs> inputs;
  {
    const auto unlabeled = make_split(cfg, "unlabeled", cfg.corpus.unlabeled, false);
    run.train = make_split(cfg, "train", cfg.corpus.train, true);
    run.val = make_split(cfg, "val", cfg.corpus.val, true);
    run.test = make_split(cfg, "test", cfg.corpus.test, true);
    run.vocab = Vocab::build(unlabeled, cfg.vocab.max_size, cfg.vocab.min_count);
    inputs = prepare_inputs(unlabeled, run.vocab, cfg.model, cfg.threads);
  }
  log(fmt("corpus ready in %.0fs, vocab %zu", seconds_since(t0), run.vocab.size()));
  Model<float> model(cfg.model, run.vocab, LabelSchema::default_schema(), child_seed(cfg.seed, 0x1417));
  PretrainOptions popts{cfg.pretrain, cfg.seed, cfg.threads, {}};
  popts.on_step = [&](const PretrainRecord& r) {
    if (r.step % 250 == 0) log(fmt("pretrain step %zu L_pre %.3f", r.step, r.terms.total));
  };
  const auto p0 = Clock::now();
  const auto history = train_pretrain(model, inputs, popts);
  run.pretrain_seconds = seconds_since(p0);
  run.pretrained = checkpoint_bytes(model);
  inputs.clear();
  log(fmt("pretrain done in %.0fs: L_pre %.3f -> %.3f", run.pretrain_seconds, history.front().terms.total,
          history.back().terms.total));
  first = finetune_and_test(std::move(model), cfg, run, cfg.seed);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = first->test.micro_f1 >= 0.90 && secs < 1800.0;
  o.detail = fmt("test micro-F1 %.4f (>=0.90), P %.4f R %.4f, block acc %.4f, best epoch %zu; %.0fs (<1800s)",
                 first->test.micro_f1, first->test.micro_precision, first->test.micro_recall,
                 first->test.block_accuracy, first->result.best_epoch, secs);
  return o;
}

// 6. Pre-trained initialization against random initialization, three fine-tuning seeds each.
Outcome ablation(const RunConfig& cfg, const DeskRun& run, const std::optional<FinetuneOutcome>& first) {
  const std::uint64_t seeds[3] = {cfg.seed, cfg.seed + 1, cfg.seed + 2};
  double pre = 0.0, rnd = 0.0;
  std::string per;
  for (std::size_t k = 0; k < 3; ++k) {
    double f_pre;
    if (k == 0 && first) {
      f_pre = first->test.micro_f1;
    } else {
      f_pre = finetune_and_test(parse_checkpoint(run.pretrained).model, cfg, run, seeds[k]).test.micro_f1;
    }
    Model<float> scratch(cfg.model, run.vocab, LabelSchema::default_schema(), child_seed(seeds[k], 0x1417));
    const double f_rnd = finetune_and_test(std::move(scratch), cfg, run, seeds[k]).test.micro_f1;
    log(fmt("seed %llu: pretrained %.4f random %.4f", static_cast<unsigned long long>(seeds[k]), f_pre, f_rnd));
    per += fmt("%s%.3f/%.3f", k ? " " : "", f_pre, f_rnd);
    pre += f_pre / 3.0;
    rnd += f_rnd / 3.0;
  }
  return {pre >= rnd, fmt("mean F1 pretrained %.4f vs random %.4f (per seed %s)", pre, rnd, per.c_str())};
}

// 7. Seeds reproduce corpora and first-step losses; formats round-trip exactly.
Outcome determinism(const RunConfig& base) {
  RunConfig cfg = base;
  cfg.model = tiny_model_config();
  auto bytes_of = [&] {
    std::string all;
    for (const char* split : {"unlabeled", "train"}) {
      for (const auto& d : make_split(cfg, split, 6, std::string(split) == "train")) all += serialize_document(d);
    }
    return all;
  };
  const std::string c1 = bytes_of(), c2 = bytes_of();
  const bool corpus_ok = c1 == c2;

  const auto docs = make_split(cfg, "train", 8, true);
  const Vocab vocab = Vocab::build(docs, 4000, 1);
  const auto inputs = prepare_inputs(docs, vocab, cfg.model);
  std::vector<const DocInputs*> batch;
  for (const auto& in : inputs) batch.push_back(&in);
  PretrainOptions popts{cfg.pretrain, 99, 1, {}};
  auto first_step = [&] {
    Model<float> m(cfg.model, vocab, LabelSchema::default_schema(), 5);
    return pretrain_step(m, batch, popts, 0);
  };
  const auto r1 = first_step(), r2 = first_step();
  const bool loss_ok = r1.terms.total == r2.terms.total && r1.terms.mlm == r2.terms.mlm &&
                       r1.terms.vpa == r2.terms.vpa && r1.terms.msp == r2.terms.msp && r1.grad_norm == r2.grad_norm;

  Model<float> model(cfg.model, vocab, LabelSchema::default_schema(), 6);
  const auto loaded = parse_checkpoint(checkpoint_bytes(model));
  bool ckpt_ok = true;
  for (const auto& d : docs) {
    const auto a = predict(model, d), b = predict(loaded.model, d);
    for (std::size_t i = 0; i < a.segments.size(); ++i) {
      ckpt_ok = ckpt_ok && a.segments[i].field == b.segments[i].field && a.segments[i].block == b.segments[i].block &&
                a.segments[i].field_probs == b.segments[i].field_probs &&
                a.segments[i].block_probs == b.segments[i].block_probs;
    }
  }

  bool json_ok = true;
  LoadOptions lo;
  lo.schema = &LabelSchema::default_schema();
  {
    std::ifstream in(std::string(ERU_TEST_DATA_DIR) + "/sample_resume.json", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    json_ok = serialize_document(load_document(ss.str(), lo)) == ss.str();
  }
  for (const auto& d : docs) {
    const std::string s = serialize_document(d);
    json_ok = json_ok && serialize_document(load_document(s, lo)) == s;
  }
  Outcome o;
  o.pass = corpus_ok && loss_ok && ckpt_ok && json_ok;
  o.detail = fmt("corpus bytes %s, first-step losses %s (L_pre %.6f), checkpoint predictions %s, segment JSON %s",
                 corpus_ok ? "identical" : "DIFFER", loss_ok ? "identical" : "DIFFER", r1.terms.total,
                 ckpt_ok ? "bit-identical" : "DIFFER", json_ok ? "byte-stable" : "UNSTABLE");
  return o;
}

// 8. paper-stats profile statistics and nearest-neighbor block structure.
Outcome calibration(const RunConfig& cfg) {
  GenerateOptions g;
  g.split = "calibration";
  g.render = false;
  g.threads = cfg.threads;
  const auto docs = generate_corpus(paper_stats_profile(cfg.seed), 500, g);
  const auto st = corpus_stats(docs);
  auto within = [](double got, double want) { return std::abs(got - want) <= 0.2 * want; };
  const double share = neighbor_heatmap(docs, LabelSchema::default_schema()).same_block_share(LabelSchema::default_schema());
  Outcome o;
  o.pass = within(st.avg_segments, 88.90) && within(st.avg_seg_tokens, 18.94) && within(st.avg_pages, 1.95) &&
           share > 0.5;
  o.detail = fmt("segments %.2f (88.90), tokens/segment %.2f (18.94), pages %.2f (1.95), +-20%%; same-block NN share %.3f (>0.5)",
                 st.avg_segments, st.avg_seg_tokens, st.avg_pages, share);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config_path = std::string(ERU_SOURCE_DIR) + "/configs/desk.json";
  std::vector<int> only;
  std::optional<std::size_t> threads;
  app.add_option("--config", config_path, "Run configuration for the desk-scale criteria")->capture_default_str();
  app.add_option("--only", only, "Criteria to run (default: all)");
  app.add_option("--threads", threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  if (threads) cfg.threads = *threads;
  cfg.threads = resolve_threads(cfg.threads);

  DeskRun run;
  std::optional<FinetuneOutcome> first;
  bool desk_ok = false;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient fidelity", gradient_fidelity},
      {"closed-form oracles", closed_forms},
      {"structural invariants", invariants},
      {"complexity", [&] { return complexity(cfg); }},
      {"desk end-to-end", [&] {
         auto o = end_to_end(cfg, run, first);
         desk_ok = true;
         return o;
       }},
      {"pre-training ablation", [&]() -> Outcome {
         if (!desk_ok) return {false, "needs criterion 5 in the same run"};
         return ablation(cfg, run, first);
       }},
      {"determinism and formats", [&] { return determinism(cfg); }},
      {"corpus calibration", [&] { return calibration(cfg); }},
  };

  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
