#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "infoseek/agents.hpp"
#include "infoseek/pipeline.hpp"

using namespace infoseek;

namespace {

// n trials for one subject/task, each ending with a guess after `moves` - 1
// samples (cycling moves 1..4 for variety unless fixed_moves is set).
std::vector<TrialRecord> make_trials(const std::string& subject, Task task, int n,
                                     int fixed_moves = 0) {
  std::vector<TrialRecord> out;
  Rng rng(std::hash<std::string>{}(subject) ^ static_cast<int>(task));
  for (int i = 0; i < n; ++i) {
    TrialConfig config = generate_trial(rng, task);
    int moves = fixed_moves ? fixed_moves : 1 + i % 4;
    std::vector<Action> actions;
    for (int m = 1; m < moves; ++m) actions.push_back(Action::parse("S"));
    actions.push_back(Action::parse(i % 2 ? "GA" : "GB"));
    out.push_back(make_record(subject, task_str(task) + "-" + std::to_string(i), config,
                              std::move(actions)));
  }
  return out;
}

std::multiset<std::string> trial_keys(const std::vector<TrialRecord>& records) {
  std::multiset<std::string> keys;
  for (const auto& r : records) keys.insert(r.subject_id + "/" + r.trial_id);
  return keys;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("split honors the 60/40 per-subject arithmetic") {
  auto check_counts = [](int n_trials, int want_train_share, int want_val) {
    auto data = make_trials("s1", Task::MaxProd, n_trials);
    DatasetSplit parts = split(data, SplitSpec{}, Rng(1));
    CHECK(static_cast<int>(parts.train.size() + parts.stopping.size()) == want_train_share);
    CHECK(static_cast<int>(parts.validation.size()) == want_val);
    CHECK(parts.stopping.size() == 1);  // 10% of share, floor at one trial
  };
  check_counts(11, 7, 4);
  check_counts(10, 6, 4);
}

TEST_CASE("split is disjoint, covering, and deterministic") {
  std::vector<TrialRecord> data;
  for (const std::string& s : {"a", "b", "c"})
    for (Task t : {Task::MaxProd, Task::MinProd}) {
      auto trials = make_trials(s, t, 9);
      data.insert(data.end(), trials.begin(), trials.end());
    }

  DatasetSplit p1 = split(data, SplitSpec{}, Rng(42));
  DatasetSplit p2 = split(data, SplitSpec{}, Rng(42));
  CHECK(trial_keys(p1.train) == trial_keys(p2.train));
  CHECK(trial_keys(p1.stopping) == trial_keys(p2.stopping));
  CHECK(trial_keys(p1.validation) == trial_keys(p2.validation));

  auto all = trial_keys(p1.train);
  for (const auto& k : trial_keys(p1.stopping)) all.insert(k);
  for (const auto& k : trial_keys(p1.validation)) all.insert(k);
  CHECK(all == trial_keys(data));

  // Every subject appears in both train and validation.
  for (const std::string& s : {"a", "b", "c"}) {
    auto has = [&](const std::vector<TrialRecord>& v) {
      return std::any_of(v.begin(), v.end(),
                         [&](const TrialRecord& r) { return r.subject_id == s; });
    };
    CHECK(has(p1.train));
    CHECK(has(p1.validation));
  }
}

TEST_CASE("subjects below the per-task minimum are excluded with a warning") {
  auto data = make_trials("ok", Task::MaxProd, 8);
  auto thin = make_trials("thin", Task::MaxProd, 3);
  data.insert(data.end(), thin.begin(), thin.end());
  DatasetSplit parts = split(data, SplitSpec{}, Rng(7));
  CHECK(parts.excluded_subjects == std::vector<std::string>{"thin"});
  for (const auto& r : parts.train) CHECK(r.subject_id == "ok");
}

TEST_CASE("training starts near ln 2 and improves on learnable data") {
  // One stubborn early guesser: strong signal a uniform start cannot explain.
  std::vector<TrialRecord> data = make_trials("s1", Task::MaxProd, 30, 1);
  DatasetSplit parts = split(data, SplitSpec{}, Rng(3));

  TrainConfig config;
  config.variant = ModelVariant::PopDNN;
  config.seed = 9;
  ModelCheckpoint ckpt = train(parts, config);

  CHECK(ckpt.log.front().epoch == 0);
  CHECK(ckpt.log.front().train_nll == doctest::Approx(std::log(2.0)).epsilon(0.2));
  CHECK(ckpt.log.back().epoch >= 1);
  double best = ckpt.log.front().stopping_nll;
  for (const auto& e : ckpt.log) best = std::min(best, e.stopping_nll);
  // Restored weights achieve the best logged stopping NLL.
  CHECK(ckpt.model.dataset_nll(parts.stopping) == doctest::Approx(best).epsilon(1e-12));
  CHECK(ckpt.model.dataset_nll(parts.train) < ckpt.log.front().train_nll);
}

TEST_CASE("training is deterministic in config and seed") {
  std::vector<TrialRecord> data;
  for (const std::string& s : {"u", "v"}) {
    auto t = make_trials(s, Task::MaxProd, 10);
    data.insert(data.end(), t.begin(), t.end());
  }
  DatasetSplit parts = split(data, SplitSpec{}, Rng(5));
  TrainConfig config;
  config.seed = 21;
  config.max_epochs = 4;

  ModelCheckpoint a = train(parts, config);
  ModelCheckpoint b = train(parts, config);
  std::vector<double> pa, pb;
  a.model.gather_params(pa);
  b.model.gather_params(pb);
  CHECK(pa == pb);
  CHECK(a.log.size() == b.log.size());
}

TEST_CASE("subject embeddings separate subjects a pooled model cannot") {
  // Subject "one" always guesses at DP1; subject "four" always samples to the
  // end. Without embeddings the two policies are irreconcilable.
  std::vector<TrialRecord> data = make_trials("one", Task::MaxProd, 20, 1);
  auto four = make_trials("four", Task::MaxProd, 20, 4);
  data.insert(data.end(), four.begin(), four.end());
  DatasetSplit parts = split(data, SplitSpec{}, Rng(11));

  TrainConfig config;
  config.seed = 13;
  config.variant = ModelVariant::SubjDNN;
  ModelCheckpoint subj = train(parts, config);
  config.variant = ModelVariant::PopDNN;
  ModelCheckpoint pop = train(parts, config);

  CHECK(subj.model.dataset_nll(parts.validation) < pop.model.dataset_nll(parts.validation));
}

TEST_CASE("checkpoint round-trip preserves NLL exactly") {
  std::vector<TrialRecord> data = make_trials("s1", Task::MaxProd, 12);
  DatasetSplit parts = split(data, SplitSpec{}, Rng(2));
  TrainConfig config;
  config.seed = 3;
  config.max_epochs = 2;
  ModelCheckpoint ckpt = train(parts, config);

  auto path = std::filesystem::temp_directory_path() / "infoseek_ckpt_test.json";
  save_checkpoint(ckpt, path);
  ModelCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.model.dataset_nll(data) == ckpt.model.dataset_nll(data));
  CHECK(loaded.config.seed == config.seed);
  CHECK(loaded.log.size() == ckpt.log.size());

  // Saving the loaded model reproduces the file byte for byte.
  auto path2 = std::filesystem::temp_directory_path() / "infoseek_ckpt_test2.json";
  save_checkpoint(loaded, path2);
  CHECK(slurp(path) == slurp(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::vector<TrialRecord> data = make_trials("s1", Task::MaxProd, 10);
  DatasetSplit parts = split(data, SplitSpec{}, Rng(2));
  TrainConfig config;
  config.max_epochs = 1;
  ModelCheckpoint ckpt = train(parts, config);
  auto path = std::filesystem::temp_directory_path() / "infoseek_ckpt_bad.json";
  save_checkpoint(ckpt, path);
  std::string text = slurp(path);

  auto write_text = [&](const std::string& s) {
    std::ofstream out(path, std::ios::binary);
    out << s;
  };

  SUBCASE("truncated file") {
    write_text(text.substr(0, text.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path), ValidationError);
  }
  SUBCASE("version bump") {
    auto pos = text.find("\"version\": 1");
    REQUIRE(pos != std::string::npos);
    write_text(text.substr(0, pos) + "\"version\": 2" + text.substr(pos + 12));
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("version"), ValidationError);
  }
  SUBCASE("flipped payload digit fails the checksum") {
    auto pos = text.find("\"train_nll\": 0.");
    REQUIRE(pos != std::string::npos);
    text[pos + 15] = text[pos + 15] == '5' ? '6' : '5';
    write_text(text);
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("checksum"), ValidationError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("sample complexity harness: shape, determinism, minimal pool") {
  std::vector<TrialRecord> data;
  for (int i = 0; i < 12; ++i) {
    auto t = make_trials("s" + std::to_string(i), Task::MaxProd, 10, 1 + i % 4);
    data.insert(data.end(), t.begin(), t.end());
  }

  TrainConfig tc;
  tc.max_epochs = 2;
  SampleComplexityConfig sc;
  sc.n_test_subjects = 4;
  sc.pool_sizes = {4, 8};  // smallest pool = test cohort alone
  sc.n_repeats = 2;
  sc.rollouts_per_trial = 3;
  sc.n_workers = 2;

  SampleComplexityResult a = sample_complexity(data, tc, sc, Rng(77));
  CHECK(a.detail.rows.size() == 4);
  CHECK(a.summary.rows.size() == 2);
  CHECK(std::get<double>(a.summary.rows[0][0]) == 4.0);
  CHECK(std::get<double>(a.summary.rows[1][0]) == 8.0);

  SampleComplexityResult b = sample_complexity(data, tc, sc, Rng(77));
  CHECK(a.detail.rows == b.detail.rows);
  CHECK(a.summary.rows == b.summary.rows);
}

TEST_CASE("sample complexity validates its pool sizes") {
  std::vector<TrialRecord> data = make_trials("s1", Task::MaxProd, 10);
  TrainConfig tc;
  SampleComplexityConfig sc;
  sc.n_test_subjects = 2;
  sc.pool_sizes = {4, 3};
  CHECK_THROWS_AS(sample_complexity(data, tc, sc, Rng(1)), std::invalid_argument);
  sc.pool_sizes = {1};
  CHECK_THROWS_AS(sample_complexity(data, tc, sc, Rng(1)), std::invalid_argument);
  sc.pool_sizes = {50};
  CHECK_THROWS_AS(sample_complexity(data, tc, sc, Rng(1)), std::invalid_argument);
}
