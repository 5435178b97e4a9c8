#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "infoseek/agents.hpp"
#include "infoseek/game.hpp"
#include "infoseek/nn.hpp"
#include "infoseek/rng.hpp"

namespace infoseek {

enum class ModelVariant { PopDNN, SubjDNN, MultiDNN };

std::string variant_str(ModelVariant v);
ModelVariant parse_variant(const std::string& s);

struct ModelConfig {
  ModelVariant variant = ModelVariant::SubjDNN;
  int hidden_dim = 10;
  int embedding_dim = 2;
  // Tasks the model covers; MultiDNN always both, others usually one.
  std::vector<Task> tasks = {Task::MaxProd};
};

// One within-trial decision stage: two tanh trunk layers of width hidden_dim
// plus linear heads for guess-vs-sample (stages 1..3) and guess-row. Heads
// read [h_k ; h_{k-1}] for k >= 2 and [h_1] at stage 1.
struct StageNet {
  nn::Graph graph;
  bool has_guess_head = false;
};

struct RolloutMetrics {
  double mean_n_moves = 0.0;
  double accuracy = 0.0;
  double mean_score = 0.0;
};

// Staged multi-task policy network with per-subject embeddings. PopDNN is
// the zero-embedding special case; MultiDNN holds one net per task framing
// sharing a single embedding table.
class BehaviorModel {
 public:
  static BehaviorModel init(const ModelConfig& config,
                            const std::vector<std::string>& subject_ids, Rng& rng);

  const ModelConfig& config() const { return config_; }
  bool has_task(Task t) const { return nets_.count(t) > 0; }

  // Unknown subjects fall back to the zero embedding (cold start).
  ActionDistribution policy(const std::string& subject_id, Task task,
                            const GameState& state) const;

  // Masked NLL: one guess/sample binary per DP reached up to min(n_moves, 3)
  // plus the guess-row binary. Returns (nll_sum, n_terms).
  std::pair<double, int> trial_nll(const TrialRecord& record) const;

  // Sum of nll_sum over records divided by sum of n_terms.
  double dataset_nll(const std::vector<TrialRecord>& records) const;

  RolloutMetrics rollout(const std::string& subject_id, const TrialConfig& config,
                         Rng& rng, int n_rollouts) const;

  // The learned embedding; zero vector under PopDNN, error for a subject
  // missing from the table otherwise.
  std::vector<double> embed(const std::string& subject_id) const;
  const std::map<std::string, std::vector<double>>& embeddings() const { return embeddings_; }

  const std::map<Task, std::array<StageNet, 4>>& nets() const { return nets_; }
  std::map<Task, std::array<StageNet, 4>>& nets() { return nets_; }
  std::map<std::string, std::vector<double>>& mutable_embeddings() { return embeddings_; }

  // Flat parameter order: tasks ascending (MaxProd first), stages 1..4,
  // layers in graph order (weights then bias), then embeddings by subject id.
  std::size_t parameter_count() const;
  void gather_params(std::vector<double>& out) const;
  void scatter_params(const std::vector<double>& in);

  // Accumulates d(nll_sum)/d(params) for one record into flat (aligned with
  // gather_params). Returns (nll_sum, n_terms).
  std::pair<double, int> accumulate_gradient(const TrialRecord& record,
                                             std::span<double> flat);

 private:
  ModelConfig config_;
  std::map<Task, std::array<StageNet, 4>> nets_;
  std::map<std::string, std::vector<double>> embeddings_;

  // Cached flat-parameter layout (the graph structure is fixed after init).
  mutable bool layout_built_ = false;
  mutable std::map<Task, std::array<std::size_t, 4>> stage_offsets_;
  mutable std::map<std::string, std::size_t> emb_offsets_;
  void build_layout() const;

  struct StageRun;
  std::vector<StageRun> run_stages(const std::string& subject_id, Task task,
                                   const TrialConfig& config, int n_stages) const;
};

}  // namespace infoseek
