// mmconcept: corpus pipeline, evaluation and recommendation server.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>

#include "mmconcept/pipeline.hpp"
#include "mmconcept/service.hpp"
#include "mmconcept/synthetic.hpp"

namespace {

using namespace mmconcept;

void print_report(const EvalOutcome& r) {
  auto line = [](const char* who, const EvalReport& rep) {
    std::cout << who << ": n=" << rep.overall.count << " top1=" << rep.overall.top1;
    for (const auto& [k, v] : rep.overall.recall_at) std::cout << " R@" << k << "=" << v;
    for (const auto& [k, v] : rep.overall.mrr_at) std::cout << " MRR@" << k << "=" << v;
    std::cout << '\n';
    for (const auto& [kind, m] : rep.per_kind) {
      std::cout << "  " << kind << ": n=" << m.count;
      for (const auto& [k, v] : m.recall_at) std::cout << " R@" << k << "=" << v;
      std::cout << '\n';
    }
  };
  line("model", r.model);
  line("baseline", r.baseline);
}

int serve(const PipelineConfig& cfg, const std::string& host, int port, std::string checkpoint, std::string vocab,
          const std::string& origin) {
  if (checkpoint.empty()) checkpoint = paths::checkpoint(cfg).string();
  if (vocab.empty()) vocab = paths::vocab(cfg).string();

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  RecommendService service({cfg.max_subwords, cfg.beam_width});
  httplib::Server server;
  service.bind(server, origin);

  std::thread loader([&] {
    try {
      service.set_model(load_model(checkpoint, vocab));
      std::clog << "model loaded from " << checkpoint << std::endl;
    } catch (const std::exception& e) {
      std::clog << "error: " << e.what() << std::endl;
      server.stop();
    }
  });
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    std::clog << "shutting down" << std::endl;
    server.stop();
  });

  std::clog << "listening on " << host << ":" << port << std::endl;
  const bool ok = server.listen(host, port);
  loader.join();
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return ok && service.model() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-concept recommendation for metamodels with a masked language model"};
  app.set_config("--config", "", "Key/value configuration file (TOML or INI)");
  app.require_subcommand(1);
  app.fallthrough();

  PipelineConfig cfg;
  std::string corpus = cfg.corpus_dir.string(), out = cfg.output_dir.string();
  app.add_option("--seed", cfg.seed, "Seed for splitting, initialisation, training and sampling")->capture_default_str();
  app.add_option("--corpus", corpus, "Corpus directory")->capture_default_str();
  app.add_option("--out", out, "Working directory for artifacts")->capture_default_str();
  app.add_option("--min-classes", cfg.min_classes)->capture_default_str();
  app.add_option("--max-classes", cfg.max_classes)->capture_default_str();
  app.add_option("--train-ratio", cfg.train_ratio)->capture_default_str();
  app.add_option("--validation-ratio", cfg.validation_ratio)->capture_default_str();
  app.add_option("--test-ratio", cfg.test_ratio)->capture_default_str();
  app.add_option("--vocab-size", cfg.vocab_size)->capture_default_str();
  app.add_option("--min-frequency", cfg.min_frequency)->capture_default_str();
  app.add_option("--preset", cfg.preset, "Model preset: desk, paper-full or tiny")->capture_default_str();
  app.add_option("--batch-size", cfg.train.batch_size)->capture_default_str();
  app.add_option("--epochs", cfg.train.max_epochs)->capture_default_str();
  app.add_option("--lr", cfg.train.learning_rate)->capture_default_str();
  app.add_option("--patience", cfg.train.early_stop_patience)->capture_default_str();
  app.add_option("--val-fraction", cfg.train.validation_fraction)->capture_default_str();
  app.add_option("--strategy", cfg.strategy, "global, local or incremental")->capture_default_str();
  app.add_option("--k", cfg.ks, "Cutoffs, e.g. 1,5,10,20")->delimiter(',')->capture_default_str();
  app.add_option("--beam-width", cfg.beam_width)->capture_default_str();
  app.add_option("--max-subwords", cfg.max_subwords)->capture_default_str();
  app.add_flag("--force", cfg.force, "Ignore stage stamps and recompute");

  auto* ingest = app.add_subcommand("ingest", "Parse and filter the corpus directory");
  ingest->alias("filter");
  auto* split = app.add_subcommand("split", "Split kept metamodels into train/validation/test");
  auto* encode = app.add_subcommand("encode", "Write surface-text corpora and the frequency table");
  auto* tok = app.add_subcommand("train-tokenizer", "Train the byte-level BPE vocabulary");
  auto* train = app.add_subcommand("train", "Train the masked language model");
  train->alias("train-model");
  auto* sample = app.add_subcommand("sample", "Generate test samples for --strategy");
  auto* evaluate = app.add_subcommand("evaluate", "Score model and baseline on the samples");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus into --corpus");
  std::size_t synth_n = 200;
  synth->add_option("-n,--count", synth_n, "Number of metamodels")->capture_default_str();
  auto* e2e = app.add_subcommand("e2e", "Run every stage and print the report");
  std::size_t e2e_synth = 0;
  e2e->add_option("--synthetic", e2e_synth, "Generate this many synthetic metamodels into --corpus first");
  auto* srv = app.add_subcommand("serve", "Serve recommendations over HTTP");
  std::string host = "127.0.0.1", origin = "*", checkpoint, vocab;
  int port = 8080;
  srv->add_option("--host", host)->capture_default_str();
  srv->add_option("--port", port)->capture_default_str();
  srv->add_option("--checkpoint", checkpoint, "Defaults to <out>/model.ckpt");
  srv->add_option("--vocab", vocab, "Defaults to <out>/vocab.json");
  srv->add_option("--origin", origin, "Allowed CORS origin")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  cfg.corpus_dir = corpus;
  cfg.output_dir = out;

  try {
    cfg.validate();
    if (*ingest) {
      const auto m = run_ingest(cfg);
      std::cout << "kept " << m.kept_count() << ", rejected " << m.rejected_count() << '\n';
    } else if (*split) {
      run_split(cfg);
    } else if (*encode) {
      run_encode(cfg);
    } else if (*tok) {
      run_train_tokenizer(cfg);
    } else if (*train) {
      run_train(cfg);
    } else if (*sample) {
      run_sample(cfg);
    } else if (*evaluate) {
      print_report(run_evaluate(cfg));
    } else if (*synth) {
      const auto corpus_mm = run_generate_synthetic(builtin_domains(), synth_n, cfg.seed, cfg.corpus_dir);
      std::cout << "wrote " << corpus_mm.size() << " metamodels to " << cfg.corpus_dir.string() << '\n';
    } else if (*e2e) {
      if (e2e_synth > 0) run_generate_synthetic(builtin_domains(), e2e_synth, cfg.seed, cfg.corpus_dir);
      print_report(run_end_to_end(cfg));
    } else if (*srv) {
      return serve(cfg, host, port, checkpoint, vocab, origin);
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
