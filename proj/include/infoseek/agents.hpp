#pragma once

#include <array>
#include <map>
#include <vector>

#include "infoseek/game.hpp"
#include "infoseek/oracle.hpp"
#include "infoseek/rng.hpp"

namespace infoseek {

// Distribution over {Sample, GuessA, GuessB}; p_sample is 0 at DP4.
struct ActionDistribution {
  double p_sample = 0.0;
  double p_guess_a = 0.0;
  double p_guess_b = 0.0;

  double prob(Action a) const;
  Action sample(Rng& rng) const;
};

// Biased-softmax generator policy. Evidence e = logit(posterior p_A); the
// bias parameters shift the guess propensity (delta_frame, alpha) and the
// row choice (rho) relative to a bias-free softmax.
ActionDistribution agent_policy(const AgentParams& params, const GameState& state);

struct NormalSpec {
  double mean = 0.0;
  double sd = 0.0;
};

// Per-subject parameter distributions for synthetic populations. tau is
// lognormal; all other parameters normal. One b draw is shared across DP1..3.
struct ParamDistributions {
  NormalSpec tau_log{0.0, 0.5};  // ln tau ~ Normal
  NormalSpec w_conf{2.0, 0.8};
  NormalSpec w_cost{-1.0, 0.5};
  NormalSpec b{-2.0, 1.3};
  NormalSpec delta_frame{0.4, 0.2};
  NormalSpec alpha{0.8, 0.4};
  NormalSpec rho{0.8, 0.4};
};

std::vector<SubjectProfile> sample_population(Rng& rng, int n_subjects,
                                              const ParamDistributions& dists);

// Simulates engine-legal, replayable trials for one synthetic subject.
// Requires profile.generator_params.
std::vector<TrialRecord> simulate_subject(const SubjectProfile& profile, Task task,
                                          int n_trials, Rng& rng);

// One logistic regression cell.
struct LogisticFit {
  std::vector<double> beta;  // last element is the intercept
  double nll = 0.0;          // mean NLL per observation at convergence
  int iterations = 0;
  bool degenerate = false;   // hit the |beta| clamp (e.g. separable cell)
};

// Pooled softmax baseline: one guess-propensity fit per (task, DP 1..3) and
// one guess-row fit per task.
struct BaselineFit {
  std::map<Task, std::array<LogisticFit, 3>> guess;  // [task][dp-1]
  std::map<Task, LogisticFit> row;
  double final_nll = 0.0;  // mean NLL per decision on the training data
};

// Feature vectors (including trailing intercept term).
std::vector<double> baseline_guess_features(const GameState& state);
std::vector<double> baseline_row_features(const GameState& state);

BaselineFit fit_baseline(const std::vector<TrialRecord>& dataset);

// Mean NLL per decision, same masking as the DNN models: one guess/sample
// binary per DP reached up to min(n_moves, 3) plus one guess-row binary.
double baseline_nll(const BaselineFit& fit, const std::vector<TrialRecord>& dataset);

// Generic logistic MLE by full-batch gradient descent with line search, run
// until the mean-NLL gradient norm drops below 1e-6; |beta| clamped to 20.
LogisticFit fit_logistic(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels);

}  // namespace infoseek
