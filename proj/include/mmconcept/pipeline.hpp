#pragma once

// Pipeline stages over a working directory. Each stage records a stamp (hash
// of its settings and input file contents) and is skipped when the stamp and
// its outputs are unchanged.
//
// Working-directory layout:
//   manifest.json  corpus.jsonl                    ingest
//   split.json                                     split
//   train.txt validation.txt test.txt frequency.json   encode
//   vocab.json                                     train-tokenizer
//   model.ckpt train_log.json                      train
//   samples-<strategy>.jsonl                       sample
//   report-<strategy>-{model,baseline}.{json,csv}  evaluate
//   .stamps/<stage>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmconcept/bpe.hpp"
#include "mmconcept/digest.hpp"
#include "mmconcept/eval.hpp"
#include "mmconcept/metamodel.hpp"
#include "mmconcept/nn/checkpoint.hpp"
#include "mmconcept/nn/config.hpp"
#include "mmconcept/nn/trainer.hpp"
#include "mmconcept/recommend.hpp"
#include "mmconcept/sampler.hpp"
#include "mmconcept/sequences.hpp"
#include "mmconcept/tree.hpp"
#include "mmconcept/xmi.hpp"

namespace mmconcept {

namespace fs = std::filesystem;

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

using Logger = std::function<void(const std::string&)>;

inline Logger stderr_logger() {
  return [](const std::string& line) { std::clog << line << std::endl; };
}

struct PipelineConfig {
  fs::path corpus_dir = "corpus";
  fs::path output_dir = "work";
  std::size_t min_classes = kMinCorpusClasses;
  std::size_t max_classes = kMaxCorpusClasses;
  double train_ratio = 0.9;
  double validation_ratio = 0.0;
  double test_ratio = 0.1;
  std::size_t vocab_size = 4000;
  std::size_t min_frequency = 2;
  std::string preset = "desk";
  nn::TrainConfig train;
  std::string strategy = "global";
  std::vector<std::size_t> ks = default_ks();
  std::size_t beam_width = 10;
  std::size_t max_subwords = 6;
  std::uint64_t seed = 42;
  bool force = false;

  void validate() const {
    if (min_classes < kMinCorpusClasses || min_classes > max_classes)
      throw std::invalid_argument("class bounds must satisfy 2 <= min_classes <= max_classes");
    if (train_ratio <= 0 || validation_ratio < 0 || test_ratio < 0)
      throw std::invalid_argument("split ratios must be non-negative and train_ratio positive");
    if (std::abs(train_ratio + validation_ratio + test_ratio - 1.0) > 1e-9)
      throw std::invalid_argument("split ratios must sum to 1");
    if (ks.empty()) throw std::invalid_argument("ks must not be empty");
    for (auto k : ks)
      if (k == 0) throw std::invalid_argument("ks must be positive");
    if (vocab_size < static_cast<std::size_t>(Vocabulary::kBaseSize))
      throw std::invalid_argument("vocab_size below the byte alphabet size");
    (void)strategy_from_string(strategy);
    (void)nn::ModelConfig::from_preset(preset);
    train.validate();
  }

  std::size_t max_k() const { return *std::max_element(ks.begin(), ks.end()); }
};

// ---------------------------------------------------------------------------
// File helpers

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

inline std::vector<std::string> read_lines(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

// ---------------------------------------------------------------------------
// Ingest

struct ManifestEntry {
  std::string id;
  bool kept = false;
  std::string reason;  // empty when kept
  std::string detail;
  std::size_t classes = 0;
  std::string sha256;

  bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  std::size_t kept_count() const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](auto& e) { return e.kept; }));
  }
  std::size_t rejected_count() const { return entries.size() - kept_count(); }
  std::vector<std::string> kept_ids() const {
    std::vector<std::string> ids;
    for (const auto& e : entries)
      if (e.kept) ids.push_back(e.id);
    return ids;
  }
  bool operator==(const Manifest&) const = default;
};

inline nlohmann::ordered_json to_json(const Manifest& m) {
  nlohmann::ordered_json j;
  j["version"] = "manifest-v1";
  j["kept"] = m.kept_count();
  j["rejected"] = m.rejected_count();
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : m.entries) {
    nlohmann::ordered_json row;
    row["id"] = e.id;
    row["status"] = e.kept ? "kept" : "rejected";
    if (!e.kept) row["reason"] = e.reason;
    if (!e.detail.empty()) row["detail"] = e.detail;
    row["classes"] = e.classes;
    row["sha256"] = e.sha256;
    j["entries"].push_back(std::move(row));
  }
  return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  for (const auto& row : j.at("entries")) {
    ManifestEntry e;
    e.id = row.at("id").get<std::string>();
    e.kept = row.at("status").get<std::string>() == "kept";
    e.reason = row.value("reason", "");
    e.detail = row.value("detail", "");
    e.classes = row.at("classes").get<std::size_t>();
    e.sha256 = row.at("sha256").get<std::string>();
    m.entries.push_back(std::move(e));
  }
  return m;
}

struct IngestResult {
  Manifest manifest;
  std::vector<Metamodel> kept;  // manifest order
};

inline bool is_metamodel_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".json" || ext == ".ecore" || ext == ".xmi";
}

/// Parses every .json / .ecore / .xmi file under `dir` (sorted by relative
/// path) and keeps the eligible ones. Ids are relative paths.
inline IngestResult ingest_directory(const fs::path& dir, std::size_t min_classes = kMinCorpusClasses,
                                     std::size_t max_classes = kMaxCorpusClasses) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw std::runtime_error("unreadable corpus directory " + dir.string());
  std::vector<fs::path> files;
  for (fs::recursive_directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec))
    if (it->is_regular_file() && is_metamodel_file(it->path())) files.push_back(it->path());
  if (ec) throw std::runtime_error("unreadable corpus directory " + dir.string() + ": " + ec.message());

  std::vector<std::pair<std::string, fs::path>> named;
  for (const auto& f : files) named.emplace_back(fs::relative(f, dir).generic_string(), f);
  std::sort(named.begin(), named.end());

  IngestResult out;
  for (const auto& [id, path] : named) {
    ManifestEntry e;
    e.id = id;
    const std::string bytes = read_file(path);
    e.sha256 = sha256_hex(bytes);
    try {
      Metamodel m = path.extension() == ".json" ? parse_canonical(bytes) : parse_xmi(bytes);
      m.id = id;
      e.classes = m.classes.size();
      if (is_corpus_eligible(m, min_classes, max_classes)) {
        e.kept = true;
        out.kept.push_back(std::move(m));
      } else {
        e.reason = "class-count";
      }
    } catch (const std::exception& ex) {
      e.reason = "parse-error";
      e.detail = ex.what();
    }
    out.manifest.entries.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split

struct SplitRatios {
  double train = 0.9;
  double validation = 0.0;
  double test = 0.1;
};

struct Split {
  std::vector<std::string> train, validation, test;
  bool operator==(const Split&) const = default;
};

inline nlohmann::ordered_json to_json(const Split& s) {
  return {{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

inline Split split_from_json(const nlohmann::json& j) {
  return {j.at("train").get<std::vector<std::string>>(), j.at("validation").get<std::vector<std::string>>(),
          j.at("test").get<std::vector<std::string>>()};
}

/// Seeded shuffle of the ids, then test, validation and train slices. Every
/// split with a positive ratio receives at least one id.
inline Split split_ids(std::vector<std::string> ids, const SplitRatios& r, std::uint64_t seed) {
  if (r.train <= 0 || r.validation < 0 || r.test < 0 || std::abs(r.train + r.validation + r.test - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must be non-negative, with a positive train share, summing to 1");
  const std::size_t n = ids.size();
  auto share = [&](double ratio) -> std::size_t {
    if (ratio <= 0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))));
  };
  const std::size_t n_test = share(r.test), n_val = share(r.validation);
  if (n_test + n_val >= n)
    throw std::invalid_argument("fewer files (" + std::to_string(n) + ") than splits require");

  std::sort(ids.begin(), ids.end());
  nn::Rng rng(seed);
  rng.shuffle(ids.begin(), ids.end());
  Split s;
  s.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.validation.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                      ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), ids.end());
  for (auto* part : {&s.train, &s.validation, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

// ---------------------------------------------------------------------------
// Stage bookkeeping

class StageCache {
 public:
  StageCache(fs::path dir, bool force, Logger log) : dir_(std::move(dir)), force_(force), log_(std::move(log)) {}

  /// Runs `body` unless the stamp for (stage, key, inputs) matches and every
  /// output exists. Returns true when the body ran.
  template <typename Body>
  bool run(const std::string& stage, const nlohmann::json& key, const std::vector<fs::path>& inputs,
           const std::vector<fs::path>& outputs, Body&& body) {
    try {
      for (const auto& in : inputs)
        if (!fs::exists(in)) throw StageError(stage, "missing input " + in.string());
      Sha256 h;
      h.update(stage).update("\n").update(key.dump()).update("\n");
      for (const auto& in : inputs) h.update(in.filename().string()).update(":").update(file_sha256(in)).update("\n");
      const std::string stamp = h.hex();
      const fs::path stamp_path = dir_ / ".stamps" / stage;

      bool fresh = !force_ && fs::exists(stamp_path) && read_file(stamp_path) == stamp;
      for (const auto& out : outputs) fresh = fresh && fs::exists(out);
      if (fresh) {
        log_(stage + ": up to date");
        return false;
      }
      const auto t0 = std::chrono::steady_clock::now();
      body();
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      write_file(stamp_path, stamp);
      std::ostringstream msg;
      msg.precision(3);
      msg << stage << ": done in " << secs << " s";
      log_(msg.str());
      return true;
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  fs::path dir_;
  bool force_;
  Logger log_;
};

namespace paths {
inline fs::path manifest(const PipelineConfig& c) { return c.output_dir / "manifest.json"; }
inline fs::path corpus(const PipelineConfig& c) { return c.output_dir / "corpus.jsonl"; }
inline fs::path split(const PipelineConfig& c) { return c.output_dir / "split.json"; }
inline fs::path lines(const PipelineConfig& c, const std::string& part) { return c.output_dir / (part + ".txt"); }
inline fs::path frequency(const PipelineConfig& c) { return c.output_dir / "frequency.json"; }
inline fs::path vocab(const PipelineConfig& c) { return c.output_dir / "vocab.json"; }
inline fs::path checkpoint(const PipelineConfig& c) { return c.output_dir / "model.ckpt"; }
inline fs::path train_log(const PipelineConfig& c) { return c.output_dir / "train_log.json"; }
inline fs::path samples(const PipelineConfig& c) { return c.output_dir / ("samples-" + c.strategy + ".jsonl"); }
inline fs::path report(const PipelineConfig& c, const std::string& who) {
  return c.output_dir / ("report-" + c.strategy + "-" + who + ".json");
}
}  // namespace paths

inline std::map<std::string, Metamodel> load_corpus(const fs::path& p) {
  std::map<std::string, Metamodel> out;
  for (const auto& line : read_lines(p)) {
    Metamodel m = parse_canonical(line);
    out.emplace(m.id, std::move(m));
  }
  return out;
}

inline std::vector<Metamodel> select(const std::map<std::string, Metamodel>& corpus, const std::vector<std::string>& ids) {
  std::vector<Metamodel> out;
  for (const auto& id : ids) {
    auto it = corpus.find(id);
    if (it == corpus.end()) throw std::runtime_error("split references unknown metamodel " + id);
    out.push_back(it->second);
  }
  return out;
}

inline std::string surface_line(const Metamodel& m) { return join_surface(flatten(build_tree(m))); }

// ---------------------------------------------------------------------------
// Stages

inline Manifest run_ingest(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  StageCache cache(cfg.output_dir, true, log);  // always rescans; downstream stamps hash its outputs
  Manifest manifest;
  cache.run("ingest", {}, {}, {}, [&] {
    auto result = ingest_directory(cfg.corpus_dir, cfg.min_classes, cfg.max_classes);
    std::string corpus;
    for (const auto& m : result.kept) corpus += serialize_canonical(m, -1) + "\n";
    write_file(paths::manifest(cfg), to_json(result.manifest).dump(2) + "\n");
    write_file(paths::corpus(cfg), corpus);
    log("ingest: kept " + std::to_string(result.manifest.kept_count()) + ", rejected " +
        std::to_string(result.manifest.rejected_count()));
    manifest = std::move(result.manifest);
  });
  return manifest;
}

inline Split run_split(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  StageCache cache(cfg.output_dir, cfg.force, log);
  const nlohmann::json key{{"ratios", {cfg.train_ratio, cfg.validation_ratio, cfg.test_ratio}}, {"seed", cfg.seed}};
  cache.run("split", key, {paths::manifest(cfg)}, {paths::split(cfg)}, [&] {
    const Manifest m = manifest_from_json(nlohmann::json::parse(read_file(paths::manifest(cfg))));
    const Split s = split_ids(m.kept_ids(), {cfg.train_ratio, cfg.validation_ratio, cfg.test_ratio}, cfg.seed);
    write_file(paths::split(cfg), to_json(s).dump(2) + "\n");
    log("split: " + std::to_string(s.train.size()) + " train / " + std::to_string(s.validation.size()) +
        " validation / " + std::to_string(s.test.size()) + " test");
  });
  return split_from_json(nlohmann::json::parse(read_file(paths::split(cfg))));
}

inline void run_encode(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  StageCache cache(cfg.output_dir, cfg.force, log);
  const std::vector<fs::path> outputs{paths::lines(cfg, "train"), paths::lines(cfg, "validation"),
                                      paths::lines(cfg, "test"), paths::frequency(cfg)};
  cache.run("encode", nlohmann::json::object(), {paths::corpus(cfg), paths::split(cfg)}, outputs, [&] {
    const auto corpus = load_corpus(paths::corpus(cfg));
    const Split s = split_from_json(nlohmann::json::parse(read_file(paths::split(cfg))));
    const std::pair<const char*, const std::vector<std::string>*> parts[] = {
        {"train", &s.train}, {"validation", &s.validation}, {"test", &s.test}};
    for (const auto& [name, ids] : parts) {
      std::string text;
      for (const auto& m : select(corpus, *ids)) text += surface_line(m) + "\n";
      write_file(paths::lines(cfg, name), text);
    }
    FrequencyTable freq;
    for (const auto& m : select(corpus, s.train)) freq.add(m);
    write_file(paths::frequency(cfg), freq.to_json().dump(2) + "\n");
  });
}

inline Vocabulary run_train_tokenizer(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  StageCache cache(cfg.output_dir, cfg.force, log);
  const nlohmann::json key{{"vocab_size", cfg.vocab_size}, {"min_frequency", cfg.min_frequency}};
  cache.run("train-tokenizer", key, {paths::lines(cfg, "train")}, {paths::vocab(cfg)}, [&] {
    const auto lines = read_lines(paths::lines(cfg, "train"));
    const Vocabulary v = train_bpe(lines, {cfg.vocab_size, cfg.min_frequency});
    write_file(paths::vocab(cfg), v.to_json().dump() + "\n");
    log("train-tokenizer: " + std::to_string(v.size()) + " tokens");
  });
  return Vocabulary::from_json(nlohmann::json::parse(read_file(paths::vocab(cfg))));
}

inline nn::ModelConfig model_config_for(const PipelineConfig& cfg, const Vocabulary& v) {
  nn::ModelConfig mc = nn::ModelConfig::from_preset(cfg.preset);
  mc.vocab_size = v.size();
  mc.seed = cfg.seed;
  return mc;
}

inline nn::Checkpoint run_train(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  StageCache cache(cfg.output_dir, cfg.force, log);
  nn::TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const nlohmann::json key{{"preset", cfg.preset}, {"train", tc}};
  const std::vector<fs::path> inputs{paths::lines(cfg, "train"), paths::lines(cfg, "validation"), paths::vocab(cfg)};
  cache.run("train", key, inputs, {paths::checkpoint(cfg), paths::train_log(cfg)}, [&] {
    const Vocabulary v = Vocabulary::from_json(nlohmann::json::parse(read_file(paths::vocab(cfg))));
    const nn::ModelConfig mc = model_config_for(cfg, v);
    std::vector<std::vector<int>> seqs;
    nn::ValidationSplit vs;
    const auto train_lines = read_lines(paths::lines(cfg, "train"));
    const auto val_lines = read_lines(paths::lines(cfg, "validation"));
    for (const auto& l : train_lines) seqs.push_back(encode_training_line(v, split_surface(l), mc.max_sequence_length));
    if (val_lines.empty()) {
      vs = nn::split_validation(seqs.size(), tc.validation_fraction, tc.seed);
    } else {
      for (std::size_t i = 0; i < seqs.size(); ++i) vs.train.push_back(i);
      for (const auto& l : val_lines) {
        vs.validation.push_back(seqs.size());
        seqs.push_back(encode_training_line(v, split_surface(l), mc.max_sequence_length));
      }
    }
    nn::MaskedLM<float> model(mc, mc.seed);
    log("train: " + std::to_string(vs.train.size()) + " sequences, " + std::to_string(vs.validation.size()) +
        " held out, " + std::to_string(model.parameter_count()) + " parameters");
    const auto t0 = std::chrono::steady_clock::now();
    auto ckpt = nn::train(model, seqs, vs, tc, [&](const nn::EpochLog& e) {
      std::ostringstream msg;
      msg.precision(4);
      msg << "train: epoch " << e.epoch << " loss " << e.train_loss << " val " << e.validation_loss << " ("
          << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)";
      log(msg.str());
    });
    nn::save_checkpoint(ckpt, paths::checkpoint(cfg));
    nlohmann::json tl{{"best_epoch", ckpt.best_epoch}, {"epochs", nn::log_to_json(ckpt.training_log)}};
    write_file(paths::train_log(cfg), tl.dump(2) + "\n");
  });
  try {
    return nn::load_checkpoint(paths::checkpoint(cfg));
  } catch (const std::exception& e) {
    throw StageError("train", e.what());
  }
}

inline std::vector<TestSample> run_sample(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  StageCache cache(cfg.output_dir, cfg.force, log);
  const nlohmann::json key{{"strategy", cfg.strategy}, {"seed", cfg.seed}};
  cache.run("sample-" + cfg.strategy, key, {paths::corpus(cfg), paths::split(cfg)}, {paths::samples(cfg)}, [&] {
    const auto corpus = load_corpus(paths::corpus(cfg));
    const Split s = split_from_json(nlohmann::json::parse(read_file(paths::split(cfg))));
    const Strategy strategy = strategy_from_string(cfg.strategy);
    std::vector<TestSample> all;
    std::uint64_t i = 0;
    for (const auto& m : select(corpus, s.test)) {
      auto part = sample(m, strategy, cfg.seed + i++);
      all.insert(all.end(), part.begin(), part.end());
    }
    std::ostringstream out;
    write_samples(out, all);
    write_file(paths::samples(cfg), out.str());
    log("sample: " + std::to_string(all.size()) + " " + cfg.strategy + " samples");
  });
  std::istringstream in(read_file(paths::samples(cfg)));
  return read_samples(in);
}

struct EvalOutcome {
  EvalReport model;
  EvalReport baseline;
};

inline EvalOutcome run_evaluate(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  if (!fs::exists(paths::checkpoint(cfg)))
    throw StageError("evaluate", "missing checkpoint " + paths::checkpoint(cfg).string());
  StageCache cache(cfg.output_dir, cfg.force, log);
  const nlohmann::json key{
      {"ks", cfg.ks}, {"beam_width", cfg.beam_width}, {"max_subwords", cfg.max_subwords}, {"strategy", cfg.strategy}};
  const std::vector<fs::path> inputs{paths::samples(cfg), paths::vocab(cfg), paths::checkpoint(cfg),
                                     paths::frequency(cfg)};
  cache.run("evaluate-" + cfg.strategy, key, inputs, {paths::report(cfg, "model"), paths::report(cfg, "baseline")}, [&] {
    std::istringstream in(read_file(paths::samples(cfg)));
    const auto samples = read_samples(in);
    if (samples.empty()) throw std::runtime_error("no test samples");
    const Vocabulary v = Vocabulary::from_json(nlohmann::json::parse(read_file(paths::vocab(cfg))));
    const auto freq = FrequencyTable::from_json(nlohmann::json::parse(read_file(paths::frequency(cfg))));
    const auto model = nn::model_from_checkpoint<float>(nn::load_checkpoint(paths::checkpoint(cfg)));
    const FillMaskOptions opts{cfg.max_subwords, cfg.beam_width};

    ScoredRun run;
    run.reserve(samples.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) {
      run.push_back(score_sample(samples[i], fill_mask_topk(model, v, samples[i].context, cfg.max_k(), opts)));
      if ((i + 1) % 100 == 0 || i + 1 == samples.size()) {
        std::ostringstream msg;
        msg.precision(4);
        msg << "evaluate: " << i + 1 << "/" << samples.size() << " samples ("
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)";
        log(msg.str());
      }
    }
    const auto model_report = build_report(run, freq, cfg.ks, "model");
    const auto base_report = build_report(run_baseline(freq, samples, cfg.max_k()), freq, cfg.ks, "baseline");
    emit_report(model_report, cfg.output_dir, "report-" + cfg.strategy + "-model");
    emit_report(base_report, cfg.output_dir, "report-" + cfg.strategy + "-baseline");
  });
  return {report_from_json(nlohmann::json::parse(read_file(paths::report(cfg, "model")))),
          report_from_json(nlohmann::json::parse(read_file(paths::report(cfg, "baseline"))))};
}

/// All stages in order; every intermediate artifact stays in output_dir.
inline EvalOutcome run_end_to_end(const PipelineConfig& cfg, const Logger& log = stderr_logger()) {
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  run_ingest(cfg, log);
  run_split(cfg, log);
  run_encode(cfg, log);
  run_train_tokenizer(cfg, log);
  run_train(cfg, log);
  run_sample(cfg, log);
  return run_evaluate(cfg, log);
}

}  // namespace mmconcept
