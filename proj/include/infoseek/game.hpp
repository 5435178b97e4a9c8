#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "infoseek/rng.hpp"

namespace infoseek {

// Thrown when an action is illegal in the current game state.
class GameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when serialized or recorded data fails consistency checks.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Task { MaxProd, MinProd };
enum class Row { A, B };
enum class Col { C1, C2 };

inline Row other_row(Row r) { return r == Row::A ? Row::B : Row::A; }

struct CardPosition {
  Row row;
  Col col;

  int index() const {
    return (row == Row::A ? 0 : 2) + (col == Col::C1 ? 0 : 1);
  }
  static CardPosition from_index(int i);

  // "A1", "A2", "B1", "B2".
  std::string str() const;
  static CardPosition parse(const std::string& s);

  friend bool operator==(CardPosition a, CardPosition b) {
    return a.row == b.row && a.col == b.col;
  }
};

// Four card values, each in [1, 10].
struct Layout {
  std::array<int, 4> values{};  // indexed by CardPosition::index()

  int value(CardPosition p) const { return values[p.index()]; }
  void set(CardPosition p, int v) { values[p.index()] = v; }
  int row_product(Row r) const;
  void validate() const;  // throws ValidationError
};

enum class ActionKind { Sample, GuessA, GuessB };

struct Action {
  ActionKind kind;

  bool is_guess() const { return kind != ActionKind::Sample; }
  Row guessed_row() const;

  // "S", "GA", "GB".
  std::string str() const;
  static Action parse(const std::string& s);

  friend bool operator==(Action a, Action b) { return a.kind == b.kind; }
};

struct TrialConfig {
  Layout layout;
  // Element 0 is the auto-revealed first card; elements 1..3 are the offers
  // at decision points 1..3. Always a permutation of the four positions.
  std::array<CardPosition, 4> reveal_order;
  Task task;

  void validate() const;
};

// Cost of revealing the k-th card, k in [1, 4]: 0, 10, 15, 20.
int sampling_cost(int decision_point);

// True iff the guessed row attains the task's extremum of row products.
// Product ties count as correct for either guess.
bool judge(const Layout& layout, Task task, Row guess);

// (correct ? +50 : -60) minus accumulated sampling costs.
int score(int n_moves, bool correct);

// Immutable within-trial state. At decision point k, exactly k cards are
// revealed; the offer at DP k (k <= 3) is reveal_order[k].
class GameState {
 public:
  // Auto-reveals the first card (cost 0) and enters decision point 1.
  static GameState start(const TrialConfig& config);

  GameState step(Action action) const;  // throws GameError on illegal action

  const TrialConfig& config() const { return config_; }
  int decision_point() const { return decision_point_; }
  bool terminated() const { return terminated_; }
  std::optional<Row> final_guess() const { return final_guess_; }
  int sunk_cost() const { return sunk_cost_; }

  bool is_revealed(CardPosition p) const { return (revealed_mask_ >> p.index()) & 1; }
  std::optional<int> revealed_value(CardPosition p) const;
  std::vector<CardPosition> hidden_positions() const;
  // The card offered at the current decision point; nullopt at DP4 or after
  // termination.
  std::optional<CardPosition> current_offer() const;

  int n_moves() const { return decision_point_; }

 private:
  TrialConfig config_;
  int decision_point_ = 1;
  unsigned revealed_mask_ = 0;
  int sunk_cost_ = 0;
  bool terminated_ = false;
  std::optional<Row> final_guess_;
};

struct TrialRecord {
  std::string subject_id;
  std::string trial_id;
  TrialConfig config;
  std::vector<Action> actions;  // length 1..4, last element is a guess
  int n_moves = 0;
  bool correct = false;
  int score = 0;
  std::optional<double> decision_time_ms;
};

// Replays the record through the engine, checking the stored derived fields
// (n_moves, correct, score) against the recomputed values. Throws
// ValidationError naming the offending field.
GameState replay(const TrialRecord& record);

// Builds a record with derived fields computed by the engine.
TrialRecord make_record(std::string subject_id, std::string trial_id,
                        const TrialConfig& config, std::vector<Action> actions,
                        std::optional<double> decision_time_ms = std::nullopt);

struct AgentParams {
  double tau = 1.0;      // softmax temperature for the guess-row choice
  double w_conf = 0.0;   // weight on |evidence logit|
  double w_cost = 0.0;   // weight on next-sample cost / 20
  std::array<double, 3> b{};  // per-decision-point guess intercepts, DP1..3
  double delta_frame = 0.0;   // additive guess shift in MaxProd
  double alpha = 0.0;         // approach-the-positive weight
  double rho = 0.0;           // reject-unsampled weight
};

struct SubjectProfile {
  std::string subject_id;
  std::optional<std::string> age_bucket;
  std::optional<std::string> gender;
  std::optional<std::string> education;
  std::optional<double> approach_param;
  std::optional<double> avoid_param;
  std::optional<AgentParams> generator_params;  // synthetic subjects only
};

// Uniform card values on {1..10}; uniform first position; each offer uniform
// over still-hidden positions.
TrialConfig generate_trial(Rng& rng, Task task);

std::string task_str(Task t);
Task parse_task(const std::string& s);

}  // namespace infoseek
