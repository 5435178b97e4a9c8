#include "infoseek/oracle.hpp"

#include <cmath>

namespace infoseek {

namespace {

// Partial layout: value in [1,10] if revealed, 0 if hidden.
using PartialLayout = std::array<int, 4>;

PartialLayout partial_from_state(const GameState& state) {
  PartialLayout vals{};
  for (int i = 0; i < 4; ++i) {
    CardPosition p = CardPosition::from_index(i);
    if (auto v = state.revealed_value(p)) vals[i] = *v;
  }
  return vals;
}

double posterior_partial(const PartialLayout& vals, Task task) {
  std::array<int, 4> hidden;
  int h = 0;
  for (int i = 0; i < 4; ++i)
    if (vals[i] == 0) hidden[h++] = i;

  PartialLayout work = vals;
  double mass = 0.0;
  long total = 1;
  for (int i = 0; i < h; ++i) total *= 10;

  for (long combo = 0; combo < total; ++combo) {
    long c = combo;
    for (int i = 0; i < h; ++i) {
      work[hidden[i]] = 1 + static_cast<int>(c % 10);
      c /= 10;
    }
    int pa = work[0] * work[1];
    int pb = work[2] * work[3];
    if (pa == pb) {
      mass += 0.5;
    } else {
      bool a_wins = task == Task::MaxProd ? pa > pb : pa < pb;
      if (a_wins) mass += 1.0;
    }
  }
  return mass / static_cast<double>(total);
}

double guess_value(const PartialLayout& vals, Task task) {
  double p = posterior_partial(vals, task);
  double p_best = std::max(p, 1.0 - p);
  return 110.0 * p_best - 60.0;
}

// Value of a decision node: dp cards revealed, a specific card offered
// (ignored at dp == 4). Future offers uniform over remaining hidden cards.
double node_value(PartialLayout vals, Task task, int dp, int offer_index) {
  double ev_guess = guess_value(vals, task);
  if (dp == 4) return ev_guess;

  double cont = 0.0;
  for (int v = 1; v <= 10; ++v) {
    vals[offer_index] = v;
    if (dp + 1 == 4) {
      cont += guess_value(vals, task);
    } else {
      // Average over the next offer, uniform over hidden positions.
      double sum = 0.0;
      int n_hidden = 0;
      for (int i = 0; i < 4; ++i) {
        if (vals[i] == 0) {
          sum += node_value(vals, task, dp + 1, i);
          ++n_hidden;
        }
      }
      cont += sum / n_hidden;
    }
  }
  vals[offer_index] = 0;
  double ev_sample = -sampling_cost(dp + 1) + cont / 10.0;
  return std::max(ev_guess, ev_sample);
}

}  // namespace

Posterior posterior(const GameState& state) {
  return {posterior_partial(partial_from_state(state), state.config().task)};
}

ValueEstimate optimal_action(const GameState& state) {
  PartialLayout vals = partial_from_state(state);
  Task task = state.config().task;
  int dp = state.decision_point();

  double p = posterior_partial(vals, task);
  ValueEstimate est;
  est.ev_guess = 110.0 * std::max(p, 1.0 - p) - 60.0;
  est.best_action = {p >= 0.5 ? ActionKind::GuessA : ActionKind::GuessB};

  if (auto offer = state.current_offer()) {
    int oi = offer->index();
    double cont = 0.0;
    for (int v = 1; v <= 10; ++v) {
      vals[oi] = v;
      if (dp + 1 == 4) {
        cont += guess_value(vals, task);
      } else {
        double sum = 0.0;
        int n_hidden = 0;
        for (int i = 0; i < 4; ++i) {
          if (vals[i] == 0) {
            sum += node_value(vals, task, dp + 1, i);
            ++n_hidden;
          }
        }
        cont += sum / n_hidden;
      }
    }
    vals[oi] = 0;
    est.ev_sample = -sampling_cost(dp + 1) + cont / 10.0;
    if (*est.ev_sample > est.ev_guess) est.best_action = {ActionKind::Sample};
  }
  return est;
}

double posterior_mc(const GameState& state, Rng& rng, int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  PartialLayout vals = partial_from_state(state);
  Task task = state.config().task;

  std::array<int, 4> hidden;
  int h = 0;
  for (int i = 0; i < 4; ++i)
    if (vals[i] == 0) hidden[h++] = i;

  double mass = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    for (int i = 0; i < h; ++i)
      vals[hidden[i]] = static_cast<int>(rng.uniform_int(1, 10));
    int pa = vals[0] * vals[1];
    int pb = vals[2] * vals[3];
    if (pa == pb) {
      mass += 0.5;
    } else {
      bool a_wins = task == Task::MaxProd ? pa > pb : pa < pb;
      if (a_wins) mass += 1.0;
    }
  }
  return mass / n_samples;
}

TrialRecord simulate_optimal(const std::string& subject_id, const std::string& trial_id,
                             const TrialConfig& config) {
  GameState s = GameState::start(config);
  std::vector<Action> actions;
  while (!s.terminated()) {
    Action a = optimal_action(s).best_action;
    actions.push_back(a);
    s = s.step(a);
  }
  return make_record(subject_id, trial_id, config, std::move(actions));
}

}  // namespace infoseek
