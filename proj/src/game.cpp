#include "infoseek/game.hpp"

#include <algorithm>

namespace infoseek {

CardPosition CardPosition::from_index(int i) {
  if (i < 0 || i > 3) throw std::out_of_range("card index out of range");
  return {i < 2 ? Row::A : Row::B, (i % 2) == 0 ? Col::C1 : Col::C2};
}

std::string CardPosition::str() const {
  std::string s(1, row == Row::A ? 'A' : 'B');
  s += (col == Col::C1 ? '1' : '2');
  return s;
}

CardPosition CardPosition::parse(const std::string& s) {
  if (s.size() != 2 || (s[0] != 'A' && s[0] != 'B') || (s[1] != '1' && s[1] != '2'))
    throw ValidationError("bad card position: '" + s + "'");
  return {s[0] == 'A' ? Row::A : Row::B, s[1] == '1' ? Col::C1 : Col::C2};
}

int Layout::row_product(Row r) const {
  return value({r, Col::C1}) * value({r, Col::C2});
}

void Layout::validate() const {
  for (int i = 0; i < 4; ++i) {
    if (values[i] < 1 || values[i] > 10)
      throw ValidationError("card value " + CardPosition::from_index(i).str() +
                            "=" + std::to_string(values[i]) + " outside [1,10]");
  }
}

Row Action::guessed_row() const {
  if (kind == ActionKind::GuessA) return Row::A;
  if (kind == ActionKind::GuessB) return Row::B;
  throw GameError("Sample action has no guessed row");
}

std::string Action::str() const {
  switch (kind) {
    case ActionKind::Sample: return "S";
    case ActionKind::GuessA: return "GA";
    case ActionKind::GuessB: return "GB";
  }
  throw std::logic_error("unreachable");
}

Action Action::parse(const std::string& s) {
  if (s == "S") return {ActionKind::Sample};
  if (s == "GA") return {ActionKind::GuessA};
  if (s == "GB") return {ActionKind::GuessB};
  throw ValidationError("bad action code: '" + s + "'");
}

void TrialConfig::validate() const {
  layout.validate();
  unsigned mask = 0;
  for (auto p : reveal_order) mask |= 1u << p.index();
  if (mask != 0xF)
    throw ValidationError("reveal_order is not a permutation of the four positions");
}

int sampling_cost(int decision_point) {
  static constexpr int kCosts[4] = {0, 10, 15, 20};
  if (decision_point < 1 || decision_point > 4)
    throw std::out_of_range("decision point must be in [1,4]");
  return kCosts[decision_point - 1];
}

bool judge(const Layout& layout, Task task, Row guess) {
  int pa = layout.row_product(Row::A);
  int pb = layout.row_product(Row::B);
  if (pa == pb) return true;
  bool a_wins = task == Task::MaxProd ? pa > pb : pa < pb;
  return guess == Row::A ? a_wins : !a_wins;
}

int score(int n_moves, bool correct) {
  int total = correct ? 50 : -60;
  for (int k = 1; k <= n_moves; ++k) total -= sampling_cost(k);
  return total;
}

GameState GameState::start(const TrialConfig& config) {
  config.validate();
  GameState s;
  s.config_ = config;
  s.decision_point_ = 1;
  s.revealed_mask_ = 1u << config.reveal_order[0].index();
  s.sunk_cost_ = sampling_cost(1);
  return s;
}

GameState GameState::step(Action action) const {
  if (terminated_) throw GameError("action after termination");
  GameState next = *this;
  if (action.kind == ActionKind::Sample) {
    if (decision_point_ >= 4) throw GameError("Sample is illegal at decision point 4");
    CardPosition offer = config_.reveal_order[decision_point_];
    next.revealed_mask_ |= 1u << offer.index();
    next.decision_point_ = decision_point_ + 1;
    next.sunk_cost_ = sunk_cost_ + sampling_cost(decision_point_ + 1);
  } else {
    next.terminated_ = true;
    next.final_guess_ = action.guessed_row();
  }
  return next;
}

std::optional<int> GameState::revealed_value(CardPosition p) const {
  if (!is_revealed(p)) return std::nullopt;
  return config_.layout.value(p);
}

std::vector<CardPosition> GameState::hidden_positions() const {
  std::vector<CardPosition> out;
  for (int i = 0; i < 4; ++i) {
    CardPosition p = CardPosition::from_index(i);
    if (!is_revealed(p)) out.push_back(p);
  }
  return out;
}

std::optional<CardPosition> GameState::current_offer() const {
  if (terminated_ || decision_point_ >= 4) return std::nullopt;
  return config_.reveal_order[decision_point_];
}

namespace {

GameState run_actions(const TrialConfig& config, const std::vector<Action>& actions) {
  if (actions.empty()) throw ValidationError("actions: empty sequence");
  GameState s = GameState::start(config);
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i + 1 < actions.size() && actions[i].is_guess())
      throw ValidationError("actions: guess before the final action");
    s = s.step(actions[i]);
  }
  if (!s.terminated()) throw ValidationError("actions: sequence does not end with a guess");
  return s;
}

}  // namespace

GameState replay(const TrialRecord& record) {
  GameState s = run_actions(record.config, record.actions);
  int n_moves = s.n_moves();
  bool correct = judge(record.config.layout, record.config.task, *s.final_guess());
  int pts = score(n_moves, correct);
  if (record.n_moves != n_moves)
    throw ValidationError("n_moves: stored " + std::to_string(record.n_moves) +
                          ", replay gives " + std::to_string(n_moves));
  if (record.correct != correct)
    throw ValidationError("correct: stored value disagrees with replay");
  if (record.score != pts)
    throw ValidationError("score: stored " + std::to_string(record.score) +
                          ", replay gives " + std::to_string(pts));
  if (record.decision_time_ms && *record.decision_time_ms <= 0.0)
    throw ValidationError("decision_time_ms: must be positive");
  return s;
}

TrialRecord make_record(std::string subject_id, std::string trial_id,
                        const TrialConfig& config, std::vector<Action> actions,
                        std::optional<double> decision_time_ms) {
  GameState s = run_actions(config, actions);
  TrialRecord r;
  r.subject_id = std::move(subject_id);
  r.trial_id = std::move(trial_id);
  r.config = config;
  r.actions = std::move(actions);
  r.n_moves = s.n_moves();
  r.correct = judge(config.layout, config.task, *s.final_guess());
  r.score = score(r.n_moves, r.correct);
  r.decision_time_ms = decision_time_ms;
  return r;
}

TrialConfig generate_trial(Rng& rng, Task task) {
  TrialConfig c;
  c.task = task;
  for (int i = 0; i < 4; ++i)
    c.layout.values[i] = static_cast<int>(rng.uniform_int(1, 10));
  std::array<int, 4> remaining = {0, 1, 2, 3};
  for (int k = 0; k < 4; ++k) {
    int j = static_cast<int>(rng.uniform_int(k, 3));
    std::swap(remaining[k], remaining[j]);
    c.reveal_order[k] = CardPosition::from_index(remaining[k]);
  }
  return c;
}

std::string task_str(Task t) { return t == Task::MaxProd ? "max" : "min"; }

Task parse_task(const std::string& s) {
  if (s == "max") return Task::MaxProd;
  if (s == "min") return Task::MinProd;
  throw ValidationError("bad task: '" + s + "' (expected 'max' or 'min')");
}

}  // namespace infoseek
