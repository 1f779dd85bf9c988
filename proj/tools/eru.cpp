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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eru/checkpoint.hpp"
#include "eru/complexity.hpp"
#include "eru/config.hpp"
#include "eru/error.hpp"
#include "eru/finetune.hpp"
#include "eru/parallel.hpp"
#include "eru/pipeline.hpp"
#include "eru/pretrain.hpp"
#include "eru/synth_corpus.hpp"

#ifndef ERU_VERSION
#define ERU_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsageExit = 2;
constexpr int kInternalExit = 10;

// Flag values shared by every subcommand's run manifest.
std::vector<std::string> g_argv;
std::string g_manifest;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run configuration (unknown keys are rejected)");
  cmd->add_option("--seed", c.seed, "Seed overriding the config's seed");
  cmd->add_option("--threads", c.threads, "Worker threads (default: ERU_THREADS or 1)");
  cmd->add_option("--manifest", g_manifest, "Run manifest path (default: next to the main output)");
}

eru::RunConfig resolve(const Common& c) {
  eru::RunConfig cfg = c.config_path.empty() ? eru::RunConfig{} : eru::load_run_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  cfg.threads = eru::resolve_threads(cfg.threads);
  return cfg;
}

template <typename T>
void override_with(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) eru::fail(eru::ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

class RunManifest {
 public:
  RunManifest(std::string command, const eru::RunConfig& cfg)
      : command_(std::move(command)), cfg_(cfg), start_(std::chrono::steady_clock::now()) {}
  json& extra() { return extra_; }
  void write(const fs::path& fallback) const {
    const fs::path path = g_manifest.empty() ? fallback : fs::path(g_manifest);
    json m = {{"command", command_},
              {"argv", g_argv},
              {"version", ERU_VERSION},
              {"config", eru::to_json(cfg_)},
              {"config_hash", hex(eru::config_hash(cfg_))},
              {"seed", cfg_.seed},
              {"threads", cfg_.threads},
              {"wall_time_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
    for (auto it = extra_.begin(); it != extra_.end(); ++it) m[it.key()] = it.value();
    write_text(path, m.dump(1) + "\n");
  }

 private:
  static std::string hex(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }
  std::string command_;
  eru::RunConfig cfg_;
  std::chrono::steady_clock::time_point start_;
  json extra_ = json::object();
};

fs::path require_path(const std::string& flag, const std::string& value, const std::string& fallback = {}) {
  const std::string v = value.empty() ? fallback : value;
  if (v.empty()) eru::fail(eru::ErrorKind::kConfig, "missing required " + flag);
  return v;
}

void print_report(const eru::EvalReport& r) { std::cout << r.table(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segment-level resume understanding: corpus generation, pre-training, fine-tuning, evaluation"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(ERU_VERSION));

  // gen-corpus
  Common gc;
  std::string gc_out, gc_profile;
  std::optional<std::size_t> gc_unlabeled, gc_train, gc_val, gc_test;
  auto* gen = app.add_subcommand("gen-corpus", "Generate synthetic unlabeled and labeled corpora");
  add_common(gen, gc);
  gen->add_option("--out", gc_out, "Output directory (one subdirectory per split)");
  gen->add_option("--profile", gc_profile, "Corpus profile: desk or paper-stats");
  gen->add_option("--unlabeled", gc_unlabeled, "Unlabeled documents");
  gen->add_option("--train", gc_train, "Labeled training documents");
  gen->add_option("--val", gc_val, "Labeled validation documents");
  gen->add_option("--test", gc_test, "Labeled test documents");

  // pretrain
  Common pc;
  std::string pc_corpus, pc_out, pc_log;
  std::optional<std::size_t> pc_steps, pc_batch;
  auto* pre = app.add_subcommand("pretrain", "Pre-train with MLM, VPA and MSP on an unlabeled corpus");
  add_common(pre, pc);
  pre->add_option("--corpus", pc_corpus, "Unlabeled corpus directory");
  pre->add_option("--out", pc_out, "Checkpoint path to write");
  pre->add_option("--log", pc_log, "Loss history CSV (default: <out>.loss.csv)");
  pre->add_option("--steps", pc_steps, "Optimizer steps");
  pre->add_option("--batch-size", pc_batch, "Documents per step");

  // finetune
  Common fc;
  std::string fc_init, fc_train, fc_val, fc_out, fc_log, fc_vocab;
  std::optional<std::size_t> fc_epochs, fc_patience;
  auto* ft = app.add_subcommand("finetune", "Fine-tune the labeling heads on a labeled corpus");
  add_common(ft, fc);
  ft->add_option("--init", fc_init, "Pre-trained checkpoint (omit for random initialization)");
  ft->add_option("--train", fc_train, "Labeled training corpus directory")->required();
  ft->add_option("--val", fc_val, "Labeled validation corpus directory")->required();
  ft->add_option("--out", fc_out, "Checkpoint path to write");
  ft->add_option("--log", fc_log, "Epoch history CSV (default: <out>.history.csv)");
  ft->add_option("--vocab-corpus", fc_vocab, "Corpus for the vocabulary when --init is absent (default: --train)");
  ft->add_option("--max-epochs", fc_epochs, "Maximum epochs");
  ft->add_option("--patience", fc_patience, "Epochs without validation gain before stopping (0 disables)");

  // eval
  Common ec;
  std::string ec_ckpt, ec_test, ec_report, ec_preds;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a labeled corpus");
  add_common(ev, ec);
  ev->add_option("--ckpt", ec_ckpt, "Checkpoint")->required();
  ev->add_option("--test", ec_test, "Labeled corpus directory")->required();
  ev->add_option("--report", ec_report, "EvalReport JSON output");
  ev->add_option("--predictions", ec_preds, "Directory for per-document prediction JSON");

  // parse
  Common xc;
  std::string xc_ckpt, xc_input, xc_out;
  auto* parse = app.add_subcommand("parse", "Label the segments of one segment-JSON document");
  add_common(parse, xc);
  parse->add_option("--ckpt", xc_ckpt, "Checkpoint")->required();
  parse->add_option("--input", xc_input, "Segment-JSON document")->required();
  parse->add_option("--out", xc_out, "Prediction JSON output (default: stdout)");

  // grad-check
  Common kc;
  double kc_eps = 1e-6, kc_tol = 1e-3;
  auto* gcheck = app.add_subcommand("grad-check", "Finite-difference check of every training loss");
  add_common(gcheck, kc);
  gcheck->add_option("--eps", kc_eps, "Central-difference step");
  gcheck->add_option("--tolerance", kc_tol, "Maximum accepted relative error");

  // bench
  Common bc;
  std::string bc_out;
  std::optional<std::vector<std::size_t>> bc_sizes;
  std::optional<std::size_t> bc_runs;
  auto* bench = app.add_subcommand("bench", "Analytic and measured segment-level vs token-level cost");
  add_common(bench, bc);
  bench->add_option("--sizes", bc_sizes, "Document token counts N")->delimiter(',');
  bench->add_option("--runs", bc_runs, "Timed runs per size (median reported)");
  bench->add_option("--out", bc_out, "Timing CSV output (default: stdout)");

  // heatmap
  Common hc;
  std::string hc_corpus, hc_out;
  auto* heat = app.add_subcommand("heatmap", "Nearest-neighbor class counts of a labeled corpus");
  add_common(heat, hc);
  heat->add_option("--corpus", hc_corpus, "Labeled corpus directory")->required();
  heat->add_option("--out", hc_out, "CSV output (default: stdout)");

  g_argv.assign(argv, argv + argc);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage_error: " << e.what() << "\n";
    return kUsageExit;
  }

  try {
    if (gen->parsed()) {
      auto cfg = resolve(gc);
      override_with(gc_unlabeled, cfg.corpus.unlabeled);
      override_with(gc_train, cfg.corpus.train);
      override_with(gc_val, cfg.corpus.val);
      override_with(gc_test, cfg.corpus.test);
      if (!gc_profile.empty()) cfg.corpus.profile = gc_profile;
      const fs::path out = require_path("--out", gc_out, cfg.paths.out);
      const auto profile = eru::profile_by_name(cfg.corpus.profile, cfg.seed);
      RunManifest manifest("gen-corpus", cfg);
      const std::pair<const char*, std::size_t> splits[] = {
          {"unlabeled", cfg.corpus.unlabeled}, {"train", cfg.corpus.train}, {"val", cfg.corpus.val}, {"test", cfg.corpus.test}};
      for (auto [split, count] : splits) {
        if (count == 0) continue;
        eru::GenerateOptions opts;
        opts.split = split;
        opts.labeled = std::string(split) != "unlabeled";
        opts.crop = {cfg.model.crop_height, cfg.model.crop_width, cfg.model.crop_enlarge};
        opts.threads = cfg.threads;
        const auto docs = eru::generate_corpus(profile, count, opts);
        eru::write_corpus(out / split, docs,
                          {{"profile", profile.to_json()}, {"seed", cfg.seed}, {"split", split}, {"labeled", opts.labeled}});
        const auto st = eru::corpus_stats(docs);
        std::cout << split << ": " << st.docs << " docs, " << st.avg_segments << " segments/doc, "
                  << st.avg_seg_tokens << " tokens/segment, " << st.avg_pages << " pages/doc\n";
        manifest.extra()["splits"][split] = st.to_json();
      }
      manifest.write(out / "run_manifest.json");
      return 0;
    }

    if (pre->parsed()) {
      auto cfg = resolve(pc);
      override_with(pc_steps, cfg.pretrain.steps);
      override_with(pc_batch, cfg.pretrain.optim.batch_size);
      cfg.validate();
      const fs::path corpus = require_path("--corpus", pc_corpus, cfg.paths.corpus);
      const fs::path out = require_path("--out", pc_out, cfg.paths.out);
      RunManifest manifest("pretrain", cfg);
      eru::LoadOptions load;
      load.max_segments = cfg.model.max_segments;
      auto docs = eru::load_corpus(corpus, load);
      eru::Vocab vocab = eru::Vocab::build(docs, cfg.vocab.max_size, cfg.vocab.min_count);
      auto inputs = eru::prepare_inputs(docs, vocab, cfg.model, cfg.threads);
      docs.clear();
      docs.shrink_to_fit();
      eru::Model<float> model(cfg.model, vocab, eru::LabelSchema::default_schema(), eru::child_seed(cfg.seed, 0x1417));
      eru::PretrainOptions opts{cfg.pretrain, cfg.seed, cfg.threads, {}};
      opts.on_step = [&](const eru::PretrainRecord& r) {
        if (r.step % 50 == 0 || r.step + 1 == cfg.pretrain.steps) {
          std::fprintf(stderr, "step %zu  L_pre %.4f  MLM %.4f  VPA %.4f  MSP %.4f\n", r.step, r.terms.total,
                       r.terms.mlm, r.terms.vpa, r.terms.msp);
        }
      };
      const auto history = eru::train_pretrain(model, inputs, opts);
      eru::save_checkpoint(out, model, {{"kind", "pretrain"}, {"seed", cfg.seed}, {"config", eru::to_json(cfg)}});
      const fs::path log = pc_log.empty() ? fs::path(out.string() + ".loss.csv") : fs::path(pc_log);
      write_text(log, eru::loss_history_csv(history));
      manifest.extra()["outputs"] = {{"checkpoint", out.string()}, {"loss_csv", log.string()}};
      manifest.extra()["docs"] = inputs.size();
      manifest.extra()["vocab_size"] = vocab.size();
      manifest.write(out.string() + ".manifest.json");
      return 0;
    }

    if (ft->parsed()) {
      auto cfg = resolve(fc);
      override_with(fc_epochs, cfg.finetune.max_epochs);
      override_with(fc_patience, cfg.finetune.patience);
      cfg.validate();
      const fs::path out = require_path("--out", fc_out, cfg.paths.out);
      RunManifest manifest("finetune", cfg);
      eru::LoadOptions load;
      load.max_segments = cfg.model.max_segments;
      load.schema = &eru::LabelSchema::default_schema();
      const auto train_docs = eru::load_corpus(fc_train, load);
      const auto val_docs = eru::load_corpus(fc_val, load);
      std::optional<eru::Model<float>> model;
      if (!fc_init.empty()) {
        auto loaded = eru::load_checkpoint(fc_init);
        model.emplace(std::move(loaded.model));
        manifest.extra()["init"] = fc_init;
      } else {
        const auto vocab_docs = fc_vocab.empty() ? train_docs : eru::load_corpus(fc_vocab, load);
        model.emplace(cfg.model, eru::Vocab::build(vocab_docs, cfg.vocab.max_size, cfg.vocab.min_count),
                      eru::LabelSchema::default_schema(), eru::child_seed(cfg.seed, 0x1417));
        manifest.extra()["init"] = "random";
      }
      const auto train = eru::prepare_labeled_set(train_docs, *model, cfg.threads);
      const auto val = eru::prepare_labeled_set(val_docs, *model, cfg.threads);
      eru::FinetuneOptions opts{cfg.finetune, cfg.seed, cfg.threads, {}};
      opts.on_epoch = [](const eru::FinetuneRecord& r) {
        std::fprintf(stderr, "epoch %zu  L_f %.4f  val micro-F1 %.4f  best %.4f\n", r.epoch, r.terms.total,
                     r.val_micro_f1, r.best_val_micro_f1);
      };
      const auto result = eru::train_finetune(*model, train, val, opts);
      eru::save_checkpoint(out, *model,
                           {{"kind", "finetune"}, {"seed", cfg.seed}, {"best_epoch", result.best_epoch},
                            {"best_val_micro_f1", result.best_val_micro_f1}, {"config", eru::to_json(cfg)}});
      const fs::path log = fc_log.empty() ? fs::path(out.string() + ".history.csv") : fs::path(fc_log);
      write_text(log, eru::finetune_history_csv(result.history));
      manifest.extra()["outputs"] = {{"checkpoint", out.string()}, {"history_csv", log.string()}};
      manifest.extra()["best_val_micro_f1"] = result.best_val_micro_f1;
      manifest.write(out.string() + ".manifest.json");
      return 0;
    }

    if (ev->parsed()) {
      auto cfg = resolve(ec);
      RunManifest manifest("eval", cfg);
      const auto loaded = eru::load_checkpoint(ec_ckpt);
      eru::LoadOptions load;
      load.max_segments = loaded.model.config().max_segments;
      load.schema = &loaded.model.schema();
      const auto docs = eru::load_corpus(ec_test, load);
      std::vector<eru::PredictionSet> preds(docs.size());
      eru::parallel_for(docs.size(), cfg.threads, [&](std::size_t i) { preds[i] = eru::predict(loaded.model, docs[i]); });
      const auto report = eru::evaluate(preds, docs, loaded.model.schema());
      print_report(report);
      manifest.extra()["micro_f1"] = report.micro_f1;
      if (!ec_report.empty()) {
        write_text(ec_report, report.to_json().dump(1) + "\n");
        manifest.extra()["report"] = ec_report;
      }
      if (!ec_preds.empty()) {
        for (const auto& p : preds) {
          write_text(fs::path(ec_preds) / (p.doc_id + ".pred.json"),
                     eru::predictions_json(p, loaded.model.schema()).dump(1) + "\n");
        }
        manifest.extra()["predictions"] = ec_preds;
      }
      manifest.write(ec_report.empty() ? fs::path("eval.manifest.json") : fs::path(ec_report + ".manifest.json"));
      return 0;
    }

    if (parse->parsed()) {
      auto cfg = resolve(xc);
      RunManifest manifest("parse", cfg);
      manifest.extra()["input"] = xc_input;
      const auto loaded = eru::load_checkpoint(xc_ckpt);
      eru::LoadOptions load;
      load.max_segments = loaded.model.config().max_segments;
      const auto doc = eru::load_document_file(xc_input, load);
      const std::string text = eru::predictions_json(eru::predict(loaded.model, doc), loaded.model.schema()).dump(1) + "\n";
      if (xc_out.empty()) {
        std::cout << text;
      } else {
        write_text(xc_out, text);
      }
      manifest.write(xc_out.empty() ? fs::path("parse.manifest.json") : fs::path(xc_out + ".manifest.json"));
      return 0;
    }

    if (gcheck->parsed()) {
      auto cfg = resolve(kc);
      if (kc.config_path.empty()) cfg.model = eru::tiny_model_config();
      RunManifest manifest("grad-check", cfg);
      const auto cases = eru::run_grad_checks(cfg.model, cfg.seed, kc_eps);
      bool ok = true;
      for (const auto& c : cases) {
        const bool pass = c.result.max_rel_error <= kc_tol;
        ok = ok && pass;
        std::printf("%-6s max_rel_err %.3e  worst %s[%zu] analytic %.6e numeric %.6e  params %zu  %.1fs  %s\n",
                    c.name.c_str(), c.result.max_rel_error, c.result.worst_param.c_str(), c.result.worst_offset,
                    c.result.analytic, c.result.numeric, c.result.checked, c.seconds, pass ? "PASS" : "FAIL");
        manifest.extra()["cases"][c.name] = {{"max_rel_error", c.result.max_rel_error}, {"pass", pass}};
      }
      manifest.write("grad-check.manifest.json");
      if (!ok) eru::fail(eru::ErrorKind::kNumeric, "gradient check exceeded tolerance " + std::to_string(kc_tol));
      return 0;
    }

    if (bench->parsed()) {
      auto cfg = resolve(bc);
      override_with(bc_sizes, cfg.bench.sizes);
      override_with(bc_runs, cfg.bench.runs);
      cfg.validate();
      auto opts = eru::bench_options(cfg.bench, cfg.seed);
      const std::size_t token_layers = opts.token_layers ? opts.token_layers : cfg.model.text_layers + cfg.model.fusion_layers;
      std::fprintf(stderr, "threads %zu, d_model %zu, L1 %zu, L3 %zu, L' %zu, Q %zu, Z %zu\n", cfg.threads,
                   cfg.model.d_model, cfg.model.text_layers, cfg.model.fusion_layers, token_layers,
                   opts.segment_tokens, opts.window);
      for (auto n : opts.sizes) {
        eru::ComplexityParams p;
        p.text_layers = static_cast<double>(cfg.model.text_layers);
        p.fusion_layers = static_cast<double>(cfg.model.fusion_layers);
        p.token_layers = static_cast<double>(token_layers);
        p.segment_tokens = static_cast<double>(opts.segment_tokens);
        p.window = static_cast<double>(opts.window);
        p.tokens = static_cast<double>(n);
        const auto a = eru::analytic_costs(p);
        std::fprintf(stderr, "analytic N=%zu  T_segment %.0f  T_token %.0f  ratio %.4f\n", n, a.segment_level,
                     a.token_level, a.ratio);
      }
      const auto rows = eru::empirical_bench(cfg.model, opts);
      const std::string csv = eru::bench_csv(rows);
      RunManifest manifest("bench", cfg);
      if (bc_out.empty()) {
        std::cout << csv;
      } else {
        write_text(bc_out, csv);
      }
      manifest.write(bc_out.empty() ? fs::path("bench.manifest.json") : fs::path(bc_out + ".manifest.json"));
      return 0;
    }

    if (heat->parsed()) {
      auto cfg = resolve(hc);
      eru::LoadOptions load;
      load.schema = &eru::LabelSchema::default_schema();
      const auto docs = eru::load_corpus(hc_corpus, load);
      const auto h = eru::neighbor_heatmap(docs, eru::LabelSchema::default_schema());
      std::fprintf(stderr, "same-block nearest-neighbor share %.4f\n",
                   h.same_block_share(eru::LabelSchema::default_schema()));
      RunManifest manifest("heatmap", cfg);
      manifest.extra()["same_block_share"] = h.same_block_share(eru::LabelSchema::default_schema());
      if (hc_out.empty()) {
        std::cout << h.csv();
      } else {
        write_text(hc_out, h.csv());
      }
      manifest.write(hc_out.empty() ? fs::path("heatmap.manifest.json") : fs::path(hc_out + ".manifest.json"));
      return 0;
    }
  } catch (const eru::Error& e) {
    std::cerr << "error: " << eru::error_kind_name(e.kind()) << ": " << e.what() << "\n";
    return eru::exit_code_for(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: " << eru::error_kind_name(eru::ErrorKind::kResource) << ": out of memory\n";
    return eru::exit_code_for(eru::ErrorKind::kResource);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << eru::error_kind_name(eru::ErrorKind::kIo) << ": " << e.what() << "\n";
    return eru::exit_code_for(eru::ErrorKind::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: internal_error: " << e.what() << "\n";
    return kInternalExit;
  }
  return 0;
}
