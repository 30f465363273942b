#include <algorithm>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "mmconcept/digest.hpp"
#include "mmconcept/pipeline.hpp"
#include "mmconcept/synthetic.hpp"
#include "test_support.hpp"

using namespace mmconcept;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("mmconcept_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct LogCapture {
  std::vector<std::string> lines;
  Logger logger() {
    return [this](const std::string& l) { lines.push_back(l); };
  }
  bool saw(const std::string& text) const {
    return std::any_of(lines.begin(), lines.end(), [&](const std::string& l) { return l == text; });
  }
};

std::string dir_fingerprint(const fs::path& dir) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) all += fs::relative(f, dir).generic_string() + ":" + file_sha256(f) + "\n";
  return all;
}

PipelineConfig config_for(const TempDir& d) {
  PipelineConfig cfg;
  cfg.corpus_dir = d.path() / "corpus";
  cfg.output_dir = d.path() / "work";
  return cfg;
}

}  // namespace

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Synthetic, TwoHundredEligibleFilesWithStableBytes) {
  TempDir a("synth_a"), b("synth_b");
  const auto corpus = run_generate_synthetic(builtin_domains(), 200, 42, a.path());
  run_generate_synthetic(builtin_domains(), 200, 42, b.path());
  EXPECT_EQ(corpus.size(), 200u);
  EXPECT_EQ(dir_fingerprint(a.path()), dir_fingerprint(b.path()));

  const auto ingested = ingest_directory(a.path());
  EXPECT_EQ(ingested.manifest.entries.size(), 200u);
  EXPECT_EQ(ingested.manifest.kept_count(), 200u);
  std::set<std::string> domains;
  for (const auto& m : corpus) {
    EXPECT_GE(m.classes.size(), 2u);
    EXPECT_LE(m.classes.size(), 15u);
    domains.insert(m.id.substr(0, m.id.find('/')));
  }
  EXPECT_EQ(domains.size(), 3u);
}

TEST(Synthetic, DifferentSeedsDiffer) {
  EXPECT_NE(generate_synthetic(builtin_domains(), 10, 1), generate_synthetic(builtin_domains(), 10, 2));
}

TEST(Ingest, FiltersByClassCountAndIsRepeatable) {
  TempDir d("ingest");
  auto cfg = config_for(d);
  fs::create_directories(cfg.corpus_dir);
  write_file(cfg.corpus_dir / "one.json", R"({"classes":[{"name":"A"}]})");
  write_file(cfg.corpus_dir / "fsm.ecore", testing_support::read_fixture("fsm.ecore"));
  write_file(cfg.corpus_dir / "fsm.json", testing_support::read_fixture("fsm.json"));
  write_file(cfg.corpus_dir / "notes.txt", "ignored");

  LogCapture log;
  const Manifest m = run_ingest(cfg, log.logger());
  EXPECT_EQ(m.kept_count(), 2u);
  EXPECT_EQ(m.rejected_count(), 1u);
  ASSERT_EQ(m.entries.size(), 3u);
  const auto& rejected = *std::find_if(m.entries.begin(), m.entries.end(), [](auto& e) { return !e.kept; });
  EXPECT_EQ(rejected.id, "one.json");
  EXPECT_EQ(rejected.reason, "class-count");
  EXPECT_EQ(rejected.sha256, sha256_hex(R"({"classes":[{"name":"A"}]})"));

  const std::string first = read_file(paths::manifest(cfg));
  EXPECT_EQ(run_ingest(cfg, log.logger()), m);
  EXPECT_EQ(read_file(paths::manifest(cfg)), first);
  EXPECT_EQ(manifest_from_json(nlohmann::json::parse(first)), m);
}

TEST(Ingest, ParseErrorsAreRecordedNotFatal) {
  TempDir d("ingest_bad");
  auto cfg = config_for(d);
  fs::create_directories(cfg.corpus_dir / "sub");
  write_file(cfg.corpus_dir / "sub" / "broken.ecore", "<ecore:EPackage");
  write_file(cfg.corpus_dir / "fsm.json", testing_support::read_fixture("fsm.json"));
  LogCapture log;
  const Manifest m = run_ingest(cfg, log.logger());
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[1].id, "sub/broken.ecore");
  EXPECT_EQ(m.entries[1].reason, "parse-error");
  EXPECT_FALSE(m.entries[1].detail.empty());
}

TEST(Ingest, MissingDirectoryIsStageError) {
  TempDir d("ingest_missing");
  auto cfg = config_for(d);
  LogCapture log;
  try {
    run_ingest(cfg, log.logger());
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "ingest");
  }
}

TEST(Split, NinetyTenOfTen) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("m" + std::to_string(i));
  const Split s = split_ids(ids, {0.9, 0.0, 0.1}, 42);
  EXPECT_EQ(s.train.size(), 9u);
  EXPECT_EQ(s.test.size(), 1u);
  EXPECT_TRUE(s.validation.empty());
  EXPECT_EQ(split_ids(ids, {0.9, 0.0, 0.1}, 42), s);
  std::vector<std::string> reversed(ids.rbegin(), ids.rend());
  EXPECT_EQ(split_ids(reversed, {0.9, 0.0, 0.1}, 42), s);
}

TEST(Split, DisjointCoverAcrossSeeds) {
  std::vector<std::string> ids;
  for (int i = 0; i < 57; ++i) ids.push_back("m" + std::to_string(i));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Split s = split_ids(ids, {0.8, 0.1, 0.1}, seed);
    std::vector<std::string> all = s.train;
    all.insert(all.end(), s.validation.begin(), s.validation.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    std::sort(all.begin(), all.end());
    std::vector<std::string> expected = ids;
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(all, expected);
    EXPECT_EQ(s.test.size(), 6u);
    EXPECT_EQ(s.validation.size(), 6u);
  }
}

TEST(Split, Errors) {
  EXPECT_THROW(split_ids({"a"}, {0.9, 0.0, 0.1}, 1), std::invalid_argument);
  EXPECT_THROW(split_ids({"a", "b"}, {0.5, 0.25, 0.25}, 1), std::invalid_argument);
  EXPECT_THROW(split_ids({"a", "b", "c"}, {0.5, 0.0, 0.1}, 1), std::invalid_argument);
}

TEST(Stages, StampsSkipUnchangedWork) {
  TempDir d("stamps");
  auto cfg = config_for(d);
  run_generate_synthetic(builtin_domains(), 20, 3, cfg.corpus_dir);
  LogCapture log;
  run_ingest(cfg, log.logger());
  const Split first = run_split(cfg, log.logger());
  EXPECT_FALSE(log.saw("split: up to date"));
  run_ingest(cfg, log.logger());
  EXPECT_EQ(run_split(cfg, log.logger()), first);
  EXPECT_TRUE(log.saw("split: up to date"));

  log.lines.clear();
  cfg.seed = 43;
  run_split(cfg, log.logger());
  EXPECT_FALSE(log.saw("split: up to date"));

  log.lines.clear();
  cfg.force = true;
  run_split(cfg, log.logger());
  EXPECT_FALSE(log.saw("split: up to date"));
}

TEST(Stages, MissingInputIsTaggedStageError) {
  TempDir d("missing_input");
  auto cfg = config_for(d);
  LogCapture log;
  try {
    run_encode(cfg, log.logger());
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "encode");
  }
}

TEST(Stages, EvaluateWithoutCheckpointFails) {
  TempDir d("no_ckpt");
  auto cfg = config_for(d);
  LogCapture log;
  try {
    run_evaluate(cfg, log.logger());
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "evaluate");
    EXPECT_NE(std::string(e.what()).find("missing checkpoint"), std::string::npos);
  }
}

TEST(Stages, InvalidConfigIsRejected) {
  TempDir d("bad_cfg");
  auto cfg = config_for(d);
  cfg.test_ratio = 0.5;
  LogCapture log;
  try {
    run_end_to_end(cfg, log.logger());
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
}

TEST(EndToEnd, TinyRunIsCompleteAndReproducible) {
  TempDir d("e2e");
  auto cfg = config_for(d);
  cfg.preset = "tiny";
  cfg.vocab_size = 400;
  cfg.train.max_epochs = 2;
  cfg.train.batch_size = 8;
  cfg.ks = {1, 5};
  cfg.beam_width = 3;
  cfg.max_subwords = 3;
  cfg.test_ratio = 0.1;
  cfg.train_ratio = 0.9;
  run_generate_synthetic(builtin_domains(), 30, 5, cfg.corpus_dir);

  LogCapture log;
  const EvalOutcome first = run_end_to_end(cfg, log.logger());
  for (const auto& p : {paths::manifest(cfg), paths::corpus(cfg), paths::split(cfg), paths::lines(cfg, "train"),
                        paths::frequency(cfg), paths::vocab(cfg), paths::checkpoint(cfg), paths::train_log(cfg),
                        paths::samples(cfg), paths::report(cfg, "model"), paths::report(cfg, "baseline")})
    EXPECT_TRUE(fs::exists(p)) << p;
  EXPECT_TRUE(fs::exists(cfg.output_dir / "report-global-model.csv"));
  EXPECT_GT(first.model.overall.count, 0u);
  EXPECT_EQ(first.model.overall.count, first.baseline.overall.count);

  // A second run reuses every stamped stage.
  log.lines.clear();
  const EvalOutcome again = run_end_to_end(cfg, log.logger());
  EXPECT_TRUE(log.saw("train: up to date"));
  EXPECT_TRUE(log.saw("evaluate-global: up to date"));
  EXPECT_EQ(again.model, first.model);

  // Recomputing from scratch gives identical numbers.
  cfg.force = true;
  const EvalOutcome forced = run_end_to_end(cfg, log.logger());
  EXPECT_EQ(forced.model, first.model);
  EXPECT_EQ(forced.baseline, first.baseline);

  fs::remove(paths::checkpoint(cfg));
  cfg.force = false;
  EXPECT_THROW(run_evaluate(cfg, log.logger()), StageError);
}
