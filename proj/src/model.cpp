#include "infoseek/model.hpp"

#include <algorithm>
#include <cmath>

namespace infoseek {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_neg(double x) {
  if (x > 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

double row_sign(Row r) { return r == Row::A ? 1.0 : -1.0; }

// Stage-k input features: normalized value of the k-th revealed card, its
// row/col encodings, and (stages 1..3) the offered row for the next card.
nn::Vec stage_features(const TrialConfig& config, int k) {
  CardPosition p = config.reveal_order[k - 1];
  nn::Vec f;
  f.reserve(4);
  f.push_back((config.layout.value(p) - 5.5) / 4.5);
  f.push_back(row_sign(p.row));
  f.push_back(p.col == Col::C1 ? 1.0 : -1.0);
  if (k <= 3) f.push_back(row_sign(config.reveal_order[k].row));
  return f;
}

StageNet make_stage(int k, int hidden_dim, int embedding_dim, Rng& rng) {
  StageNet s;
  int feat_dim = k <= 3 ? 4 : 3;
  int prev_dim = k == 1 ? embedding_dim : hidden_dim;

  nn::Graph& g = s.graph;
  int feat = g.add_input("feat", feat_dim);
  int prev = g.add_input("prev", prev_dim);
  int trunk_in = g.add_concat({feat, prev});
  int h1 = g.add_dense(trunk_in, nn::make_dense(hidden_dim, feat_dim + prev_dim,
                                                nn::Activation::Tanh, rng));
  int h2 = g.add_dense(h1, nn::make_dense(hidden_dim, hidden_dim, nn::Activation::Tanh, rng));
  g.mark_output("h", h2);

  int head_in = k == 1 ? h2 : g.add_concat({h2, prev});
  int head_dim = g.node_dim(head_in);
  if (k <= 3) {
    int guess = g.add_dense(head_in, nn::make_dense(1, head_dim, nn::Activation::Identity, rng));
    g.mark_output("guess", guess);
    s.has_guess_head = true;
  }
  int row = g.add_dense(head_in, nn::make_dense(1, head_dim, nn::Activation::Identity, rng));
  g.mark_output("row", row);
  return s;
}

}  // namespace

std::string variant_str(ModelVariant v) {
  switch (v) {
    case ModelVariant::PopDNN: return "pop";
    case ModelVariant::SubjDNN: return "subj";
    case ModelVariant::MultiDNN: return "multi";
  }
  throw std::logic_error("unreachable");
}

ModelVariant parse_variant(const std::string& s) {
  if (s == "pop") return ModelVariant::PopDNN;
  if (s == "subj") return ModelVariant::SubjDNN;
  if (s == "multi") return ModelVariant::MultiDNN;
  throw ValidationError("bad model variant: '" + s + "' (expected pop|subj|multi)");
}

BehaviorModel BehaviorModel::init(const ModelConfig& config,
                                  const std::vector<std::string>& subject_ids, Rng& rng) {
  BehaviorModel m;
  m.config_ = config;
  std::vector<Task> tasks = config.tasks;
  if (config.variant == ModelVariant::MultiDNN) tasks = {Task::MaxProd, Task::MinProd};
  m.config_.tasks = tasks;
  std::sort(tasks.begin(), tasks.end());
  for (Task t : tasks) {
    Rng tr = rng.substream(task_str(t));
    auto& stages = m.nets_[t];
    for (int k = 1; k <= 4; ++k) {
      Rng sr = tr.substream(static_cast<std::uint64_t>(k));
      stages[k - 1] = make_stage(k, config.hidden_dim, config.embedding_dim, sr);
    }
  }
  if (config.variant != ModelVariant::PopDNN) {
    Rng er = rng.substream("embeddings");
    for (const auto& id : subject_ids) {
      Rng sr = er.substream(id);
      std::vector<double> e(config.embedding_dim);
      for (double& v : e) v = sr.normal(0.0, 0.1);
      m.embeddings_[id] = std::move(e);
    }
  }
  return m;
}

std::vector<double> BehaviorModel::embed(const std::string& subject_id) const {
  if (config_.variant == ModelVariant::PopDNN)
    return std::vector<double>(config_.embedding_dim, 0.0);
  auto it = embeddings_.find(subject_id);
  if (it == embeddings_.end())
    throw std::out_of_range("unknown subject '" + subject_id + "'");
  return it->second;
}

struct BehaviorModel::StageRun {
  nn::ForwardCache cache;
  nn::Vec feat;
  nn::Vec prev;
  double guess_logit = 0.0;  // valid for stages 1..3
  double row_logit = 0.0;
  nn::Vec h;
};

std::vector<BehaviorModel::StageRun> BehaviorModel::run_stages(
    const std::string& subject_id, Task task, const TrialConfig& config, int n_stages) const {
  auto it = nets_.find(task);
  if (it == nets_.end())
    throw std::invalid_argument("model has no network for task '" + task_str(task) + "'");
  const auto& stages = it->second;

  nn::Vec prev(config_.embedding_dim, 0.0);
  if (config_.variant != ModelVariant::PopDNN) {
    auto e = embeddings_.find(subject_id);
    if (e != embeddings_.end()) prev = e->second;  // cold start otherwise
  }

  std::vector<StageRun> runs;
  runs.reserve(n_stages);
  for (int k = 1; k <= n_stages; ++k) {
    StageRun run;
    run.feat = stage_features(config, k);
    run.prev = prev;
    auto out = nn::forward(stages[k - 1].graph, {{"feat", run.feat}, {"prev", run.prev}},
                           run.cache);
    if (stages[k - 1].has_guess_head) run.guess_logit = out["guess"][0];
    run.row_logit = out["row"][0];
    run.h = out["h"];
    prev = run.h;
    runs.push_back(std::move(run));
  }
  return runs;
}

ActionDistribution BehaviorModel::policy(const std::string& subject_id, Task task,
                                         const GameState& state) const {
  if (state.terminated()) throw GameError("policy on terminated state");
  int dp = state.decision_point();
  auto runs = run_stages(subject_id, task, state.config(), dp);
  const StageRun& last = runs.back();

  double p_guess = dp <= 3 ? sigmoid(last.guess_logit) : 1.0;
  double p_a = sigmoid(last.row_logit);
  ActionDistribution d;
  d.p_sample = 1.0 - p_guess;
  d.p_guess_a = p_guess * p_a;
  d.p_guess_b = p_guess * (1.0 - p_a);
  return d;
}

std::pair<double, int> BehaviorModel::trial_nll(const TrialRecord& record) const {
  replay(record);
  int n = record.n_moves;
  auto runs = run_stages(record.subject_id, record.config.task, record.config, n);

  double nll = 0.0;
  int terms = 0;
  for (int k = 1; k <= std::min(n, 3); ++k) {
    bool guessed = k == n;
    double z = runs[k - 1].guess_logit;
    nll += softplus_neg(guessed ? z : -z);
    ++terms;
  }
  bool guess_a = record.actions.back().guessed_row() == Row::A;
  double zr = runs[n - 1].row_logit;
  nll += softplus_neg(guess_a ? zr : -zr);
  ++terms;
  return {nll, terms};
}

double BehaviorModel::dataset_nll(const std::vector<TrialRecord>& records) const {
  if (records.empty()) throw std::invalid_argument("dataset_nll: empty dataset");
  double nll = 0.0;
  long terms = 0;
  for (const auto& r : records) {
    auto [s, t] = trial_nll(r);
    nll += s;
    terms += t;
  }
  return nll / static_cast<double>(terms);
}

RolloutMetrics BehaviorModel::rollout(const std::string& subject_id,
                                      const TrialConfig& config, Rng& rng,
                                      int n_rollouts) const {
  if (n_rollouts < 1) throw std::invalid_argument("n_rollouts must be >= 1");
  RolloutMetrics m;
  for (int i = 0; i < n_rollouts; ++i) {
    GameState s = GameState::start(config);
    while (!s.terminated()) {
      Action a = policy(subject_id, config.task, s).sample(rng);
      s = s.step(a);
    }
    bool correct = judge(config.layout, config.task, *s.final_guess());
    m.mean_n_moves += s.n_moves();
    m.accuracy += correct ? 1.0 : 0.0;
    m.mean_score += score(s.n_moves(), correct);
  }
  m.mean_n_moves /= n_rollouts;
  m.accuracy /= n_rollouts;
  m.mean_score /= n_rollouts;
  return m;
}

std::size_t BehaviorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, stages] : nets_)
    for (const auto& s : stages) n += s.graph.parameter_count();
  for (const auto& [_, e] : embeddings_) n += e.size();
  return n;
}

void BehaviorModel::gather_params(std::vector<double>& out) const {
  out.clear();
  out.reserve(parameter_count());
  for (const auto& [_, stages] : nets_)
    for (const auto& s : stages)
      for (auto span : s.graph.parameter_spans())
        out.insert(out.end(), span.begin(), span.end());
  for (const auto& [_, e] : embeddings_) out.insert(out.end(), e.begin(), e.end());
}

void BehaviorModel::scatter_params(const std::vector<double>& in) {
  if (in.size() != parameter_count())
    throw std::invalid_argument("scatter_params: size mismatch");
  std::size_t pos = 0;
  for (auto& [_, stages] : nets_)
    for (auto& s : stages)
      for (auto span : s.graph.parameter_spans()) {
        std::copy(in.begin() + pos, in.begin() + pos + span.size(), span.begin());
        pos += span.size();
      }
  for (auto& [_, e] : embeddings_) {
    std::copy(in.begin() + pos, in.begin() + pos + e.size(), e.begin());
    pos += e.size();
  }
}

void BehaviorModel::build_layout() const {
  if (layout_built_) return;
  std::size_t pos = 0;
  for (const auto& [t, ss] : nets_)
    for (int k = 0; k < 4; ++k) {
      stage_offsets_[t][k] = pos;
      pos += ss[k].graph.parameter_count();
    }
  for (const auto& [id, e] : embeddings_) {
    emb_offsets_[id] = pos;
    pos += e.size();
  }
  layout_built_ = true;
}

std::pair<double, int> BehaviorModel::accumulate_gradient(const TrialRecord& record,
                                                          std::span<double> flat) {
  build_layout();
  int n = record.n_moves;
  Task task = record.config.task;
  auto runs = run_stages(record.subject_id, task, record.config, n);
  auto& stages = nets_.at(task);

  double nll = 0.0;
  int terms = 0;
  nn::Vec d_h_next;  // gradient w.r.t. h_k arriving from stage k+1
  for (int k = n; k >= 1; --k) {
    const StageRun& run = runs[k - 1];
    std::map<std::string, nn::Vec> d_out;
    if (k <= 3) {
      bool guessed = k == n;
      double z = run.guess_logit;
      nll += softplus_neg(guessed ? z : -z);
      ++terms;
      d_out["guess"] = {sigmoid(z) - (guessed ? 1.0 : 0.0)};
    }
    if (k == n) {
      bool guess_a = record.actions.back().guessed_row() == Row::A;
      double z = run.row_logit;
      nll += softplus_neg(guess_a ? z : -z);
      ++terms;
      d_out["row"] = {sigmoid(z) - (guess_a ? 1.0 : 0.0)};
    }
    if (!d_h_next.empty()) d_out["h"] = d_h_next;

    nn::Gradients grads;
    grads.init_for(stages[k - 1].graph);
    nn::backward(stages[k - 1].graph, run.cache, d_out, grads);

    std::size_t off = stage_offsets_[task][k - 1];
    for (std::size_t l = 0; l < grads.d_weights.size(); ++l) {
      for (double g : grads.d_weights[l]) flat[off++] += g;
      for (double g : grads.d_bias[l]) flat[off++] += g;
    }
    d_h_next = grads.d_inputs["prev"];
  }

  // d_h_next now holds the gradient w.r.t. the stage-1 "prev" input, i.e.
  // the subject embedding.
  if (config_.variant != ModelVariant::PopDNN) {
    auto it = emb_offsets_.find(record.subject_id);
    if (it != emb_offsets_.end())
      for (std::size_t i = 0; i < d_h_next.size(); ++i) flat[it->second + i] += d_h_next[i];
  }
  return {nll, terms};
}

}  // namespace infoseek
