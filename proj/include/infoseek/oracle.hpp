#pragma once

#include <optional>

#include "infoseek/game.hpp"
#include "infoseek/rng.hpp"

namespace infoseek {

struct Posterior {
  // Probability that row A is the task-correct answer given the revealed
  // cards, with product-tie mass split half/half.
  double p_row_a;
};

struct ValueEstimate {
  double ev_guess;                  // EV of guessing the better row now
  std::optional<double> ev_sample;  // absent at DP4
  Action best_action;
};

// Exact posterior by enumeration over all completions of the hidden cards
// (uniform i.i.d. on {1..10}).
Posterior posterior(const GameState& state);

// Reward-optimal action by backward induction. Future offers are assumed
// uniform over the remaining hidden positions; sunk costs are excluded.
ValueEstimate optimal_action(const GameState& state);

// Monte Carlo estimate of posterior().p_row_a; unbiased, SE <= 0.5/sqrt(n).
double posterior_mc(const GameState& state, Rng& rng, int n_samples);

// Plays a trial greedily by optimal_action(); used as the bias-free reference
// agent in the analysis nulls.
TrialRecord simulate_optimal(const std::string& subject_id, const std::string& trial_id,
                             const TrialConfig& config);

}  // namespace infoseek
