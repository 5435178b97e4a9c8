#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "infoseek/analysis.hpp"
#include "infoseek/game.hpp"
#include "infoseek/model.hpp"
#include "infoseek/rng.hpp"

namespace infoseek {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SplitSpec {
  double train_fraction = 0.6;
  double stopping_fraction = 0.1;  // of the training share, at least 1 trial
  int min_trials_per_task = 5;
};

struct DatasetSplit {
  std::vector<TrialRecord> train;
  std::vector<TrialRecord> stopping;
  std::vector<TrialRecord> validation;
  std::vector<std::string> excluded_subjects;
};

// Per-(subject, task) stratified split: ceil(train_fraction * n) trials go to
// the training share, of which ceil(stopping_fraction * share) (at least 1)
// are carved out for early stopping; the rest is validation. Subjects below
// the per-task minimum are excluded with a warning entry.
DatasetSplit split(const std::vector<TrialRecord>& dataset, const SplitSpec& spec, Rng rng);

struct TrainConfig {
  double lr = 0.003;
  int batch_size = 256;
  int max_epochs = 30;
  int patience = 3;          // epochs without >= min_delta improvement
  double min_delta = 1e-4;   // nats per decision
  std::uint64_t seed = 0;
  ModelVariant variant = ModelVariant::SubjDNN;
  int embedding_dim = 2;
  int hidden_dim = 10;
  Task task = Task::MaxProd;  // ignored for MultiDNN (always both tasks)
};

struct EpochLog {
  int epoch = 0;  // 0 = before any update
  double train_nll = 0.0;
  double stopping_nll = 0.0;
};

struct ModelCheckpoint {
  int format_version = 1;
  TrainConfig config;
  BehaviorModel model;
  std::vector<EpochLog> log;
};

// Minimizes the mean masked NLL with Adam; per-epoch evaluation on the
// stopping set; restores the best weights seen. Deterministic in
// (dataset, config).
ModelCheckpoint train(const DatasetSplit& data, const TrainConfig& config);

// Versioned, checksummed JSON; floats round-trip exactly.
void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

struct SampleComplexityConfig {
  int n_test_subjects = 100;
  std::vector<int> pool_sizes;  // total training-pool sizes, ascending,
                                // each >= n_test_subjects
  int n_repeats = 50;
  int rollouts_per_trial = 20;
  int n_workers = 0;  // 0 = hardware concurrency
};

struct SampleComplexityResult {
  AnalysisTable detail;   // pool_size x repeat x correlation per metric
  AnalysisTable summary;  // pool_size -> mean +- SEM per metric
};

// Fig-8 style experiment: fixed test cohort, growing training pool of extra
// subjects, Subj-DNN training per (repeat, pool), per-subject metric
// correlations on the test cohort's validation trials. Work fans out across
// worker threads; results are merged by key, not completion order.
SampleComplexityResult sample_complexity(const std::vector<TrialRecord>& dataset,
                                         const TrainConfig& train_config,
                                         const SampleComplexityConfig& config,
                                         Rng master);

}  // namespace infoseek
