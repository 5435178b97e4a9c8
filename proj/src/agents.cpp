#include "infoseek/agents.hpp"

#include <algorithm>
#include <cmath>

namespace infoseek {

namespace {

constexpr double kBetaClamp = 20.0;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// -log sigmoid(x), stable for large |x|.
double softplus_neg(double x) {
  if (x > 0.0) return std::log1p(std::exp(-x));
  return -x + std::log1p(std::exp(x));
}

double clamped_logit(double p) {
  constexpr double eps = 1e-12;
  p = std::clamp(p, eps, 1.0 - eps);
  return std::log(p / (1.0 - p));
}

double row_sign(Row r) { return r == Row::A ? 1.0 : -1.0; }

}  // namespace

double ActionDistribution::prob(Action a) const {
  switch (a.kind) {
    case ActionKind::Sample: return p_sample;
    case ActionKind::GuessA: return p_guess_a;
    case ActionKind::GuessB: return p_guess_b;
  }
  throw std::logic_error("unreachable");
}

Action ActionDistribution::sample(Rng& rng) const {
  double u = rng.uniform();
  if (u < p_sample) return {ActionKind::Sample};
  if (u < p_sample + p_guess_a) return {ActionKind::GuessA};
  return {ActionKind::GuessB};
}

ActionDistribution agent_policy(const AgentParams& params, const GameState& state) {
  if (state.terminated()) throw GameError("agent_policy on terminated state");

  double e = clamped_logit(posterior(state).p_row_a);
  int dp = state.decision_point();
  auto offer = state.current_offer();
  double o = offer ? row_sign(offer->row) : 0.0;

  double p_guess = 1.0;
  if (dp <= 3) {
    double offer_favored = 0.0;
    if (offer && e != 0.0) {
      Row favored = e > 0.0 ? Row::A : Row::B;
      offer_favored = offer->row == favored ? 1.0 : 0.0;
    }
    double logit_guess = params.w_conf * std::abs(e) +
                         params.w_cost * (sampling_cost(dp + 1) / 20.0) +
                         params.b[dp - 1] +
                         params.delta_frame * (state.config().task == Task::MaxProd ? 1.0 : 0.0) -
                         params.alpha * offer_favored;
    p_guess = sigmoid(logit_guess);
  }
  double p_a_given_guess = sigmoid(e / params.tau - params.rho * o);

  ActionDistribution d;
  d.p_sample = 1.0 - p_guess;
  d.p_guess_a = p_guess * p_a_given_guess;
  d.p_guess_b = p_guess * (1.0 - p_a_given_guess);
  return d;
}

std::vector<SubjectProfile> sample_population(Rng& rng, int n_subjects,
                                              const ParamDistributions& dists) {
  if (n_subjects < 1) throw std::invalid_argument("n_subjects must be >= 1");
  static const char* kAges[] = {"18-25", "26-40", "41-60", "60+"};
  static const char* kGenders[] = {"f", "m", "other"};
  static const char* kEdu[] = {"school", "college", "postgrad"};

  std::vector<SubjectProfile> out;
  out.reserve(n_subjects);
  for (int i = 0; i < n_subjects; ++i) {
    Rng sub = rng.substream(static_cast<std::uint64_t>(i));
    AgentParams p;
    p.tau = std::exp(sub.normal(dists.tau_log.mean, dists.tau_log.sd));
    p.w_conf = sub.normal(dists.w_conf.mean, dists.w_conf.sd);
    p.w_cost = sub.normal(dists.w_cost.mean, dists.w_cost.sd);
    double b = sub.normal(dists.b.mean, dists.b.sd);
    p.b = {b, b, b};
    p.delta_frame = sub.normal(dists.delta_frame.mean, dists.delta_frame.sd);
    p.alpha = sub.normal(dists.alpha.mean, dists.alpha.sd);
    p.rho = sub.normal(dists.rho.mean, dists.rho.sd);

    SubjectProfile s;
    char id[16];
    std::snprintf(id, sizeof(id), "s%05d", i);
    s.subject_id = id;
    s.age_bucket = kAges[sub.uniform_int(0, 3)];
    s.gender = kGenders[sub.uniform_int(0, 2)];
    s.education = kEdu[sub.uniform_int(0, 2)];
    // Extrinsic "separate task" estimates: the generator truths themselves.
    s.approach_param = p.alpha;
    s.avoid_param = p.rho;
    s.generator_params = p;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TrialRecord> simulate_subject(const SubjectProfile& profile, Task task,
                                          int n_trials, Rng& rng) {
  if (!profile.generator_params)
    throw std::invalid_argument("simulate_subject: profile has no generator params");
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");

  std::vector<TrialRecord> out;
  out.reserve(n_trials);
  for (int t = 0; t < n_trials; ++t) {
    TrialConfig config = generate_trial(rng, task);
    GameState s = GameState::start(config);
    std::vector<Action> actions;
    while (!s.terminated()) {
      Action a = agent_policy(*profile.generator_params, s).sample(rng);
      actions.push_back(a);
      s = s.step(a);
    }
    out.push_back(make_record(profile.subject_id, task_str(task) + "-" + std::to_string(t),
                              config, std::move(actions)));
  }
  return out;
}

namespace {

double logistic_mean_nll(const std::vector<std::vector<double>>& x,
                         const std::vector<int>& y, const std::vector<double>& beta) {
  double nll = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) z += beta[j] * x[i][j];
    nll += softplus_neg(y[i] ? z : -z);
  }
  return nll / static_cast<double>(x.size());
}

void logistic_grad(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                   const std::vector<double>& beta, std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) z += beta[j] * x[i][j];
    double r = sigmoid(z) - (y[i] ? 1.0 : 0.0);
    for (std::size_t j = 0; j < beta.size(); ++j) grad[j] += r * x[i][j];
  }
  for (double& g : grad) g /= static_cast<double>(x.size());
}

}  // namespace

LogisticFit fit_logistic(const std::vector<std::vector<double>>& features,
                         const std::vector<int>& labels) {
  if (features.empty() || features.size() != labels.size())
    throw std::invalid_argument("fit_logistic: empty or mismatched data");
  std::size_t d = features[0].size();

  LogisticFit fit;
  fit.beta.assign(d, 0.0);
  std::vector<double> grad(d), prev_beta(d), prev_grad(d), trial(d);
  double nll = logistic_mean_nll(features, labels, fit.beta);
  logistic_grad(features, labels, fit.beta, grad);
  double step = 1.0;
  const int max_iter = 20000;

  auto clamp_beta = [](std::vector<double>& b) {
    for (double& v : b) v = std::clamp(v, -kBetaClamp, kBetaClamp);
  };

  int it = 0;
  for (; it < max_iter; ++it) {
    // Projected gradient: coordinates pinned at the clamp do not count.
    double pg2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      bool pinned = (fit.beta[j] >= kBetaClamp && grad[j] < 0.0) ||
                    (fit.beta[j] <= -kBetaClamp && grad[j] > 0.0);
      if (!pinned) pg2 += grad[j] * grad[j];
    }
    if (std::sqrt(pg2) < 1e-6) break;

    if (it > 0) {
      // Barzilai-Borwein step estimate, safeguarded.
      double sy = 0.0, yy = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        double s = fit.beta[j] - prev_beta[j];
        double yv = grad[j] - prev_grad[j];
        sy += s * yv;
        yy += yv * yv;
      }
      if (yy > 0.0 && sy > 0.0) step = std::clamp(sy / yy, 1e-6, 1e6);
    }

    prev_beta = fit.beta;
    prev_grad = grad;
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;

    // Armijo backtracking.
    double t = step;
    double new_nll = nll;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = fit.beta[j] - t * grad[j];
      clamp_beta(trial);
      new_nll = logistic_mean_nll(features, labels, trial);
      if (new_nll <= nll - 1e-4 * t * g2) break;
      t *= 0.5;
    }
    if (new_nll >= nll && t * std::sqrt(g2) < 1e-14) break;  // stalled at clamp
    fit.beta = trial;
    nll = new_nll;
    logistic_grad(features, labels, fit.beta, grad);
  }

  fit.iterations = it;
  fit.nll = nll;
  // Separable cells either ride a coordinate into the clamp or fit the data
  // essentially perfectly before getting there; both are degenerate.
  for (double v : fit.beta)
    if (std::abs(v) >= kBetaClamp - 1e-9) fit.degenerate = true;
  if (nll < 1e-4) fit.degenerate = true;
  return fit;
}

std::vector<double> baseline_guess_features(const GameState& state) {
  const TrialConfig& c = state.config();
  int dp = state.decision_point();
  std::vector<double> f;
  f.reserve(dp + 3);
  for (int k = 0; k < dp; ++k)
    f.push_back(c.layout.value(c.reveal_order[k]) - 5.5);

  auto offer = state.current_offer();
  double p = posterior(state).p_row_a;
  double offer_favored = 0.0;
  if (offer && p != 0.5) {
    Row favored = p > 0.5 ? Row::A : Row::B;
    offer_favored = offer->row == favored ? 1.0 : 0.0;
  }
  f.push_back(offer_favored);
  f.push_back(offer ? row_sign(offer->row) : 0.0);
  f.push_back(1.0);  // intercept
  return f;
}

std::vector<double> baseline_row_features(const GameState& state) {
  const TrialConfig& c = state.config();
  double diff = 0.0;
  for (int i = 0; i < 4; ++i) {
    CardPosition p = CardPosition::from_index(i);
    if (auto v = state.revealed_value(p))
      diff += (p.row == Row::A ? 1.0 : -1.0) * (*v - 5.5);
  }
  auto offer = state.current_offer();
  return {diff, offer ? row_sign(offer->row) : 0.0, 1.0};
}

namespace {

// Walks a record's decision prefix, invoking fn(state, dp, is_last) for each
// decision point reached.
template <typename Fn>
void for_each_decision(const TrialRecord& record, Fn&& fn) {
  GameState s = GameState::start(record.config);
  for (std::size_t i = 0; i < record.actions.size(); ++i) {
    fn(s, s.decision_point(), record.actions[i]);
    if (i + 1 < record.actions.size()) s = s.step(record.actions[i]);
  }
}

}  // namespace

BaselineFit fit_baseline(const std::vector<TrialRecord>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("fit_baseline: empty dataset");

  struct Cell {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
  };
  std::map<Task, std::array<Cell, 3>> guess_cells;
  std::map<Task, Cell> row_cells;

  for (const auto& r : dataset) {
    replay(r);
    for_each_decision(r, [&](const GameState& s, int dp, Action a) {
      Task task = r.config.task;
      if (dp <= 3) {
        auto& cell = guess_cells[task][dp - 1];
        cell.x.push_back(baseline_guess_features(s));
        cell.y.push_back(a.is_guess() ? 1 : 0);
      }
      if (a.is_guess()) {
        auto& cell = row_cells[task];
        cell.x.push_back(baseline_row_features(s));
        cell.y.push_back(a.guessed_row() == Row::A ? 1 : 0);
      }
    });
  }

  BaselineFit fit;
  for (auto& [task, cells] : guess_cells) {
    for (int dp = 0; dp < 3; ++dp) {
      auto& cell = cells[dp];
      if (cell.x.empty()) {
        LogisticFit empty;
        empty.beta.assign(static_cast<std::size_t>(dp + 1) + 3, 0.0);
        empty.degenerate = true;
        fit.guess[task][dp] = empty;
      } else {
        fit.guess[task][dp] = fit_logistic(cell.x, cell.y);
      }
    }
  }
  for (auto& [task, cell] : row_cells) fit.row[task] = fit_logistic(cell.x, cell.y);

  fit.final_nll = baseline_nll(fit, dataset);
  return fit;
}

double baseline_nll(const BaselineFit& fit, const std::vector<TrialRecord>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("baseline_nll: empty dataset");
  double nll = 0.0;
  long terms = 0;
  for (const auto& r : dataset) {
    for_each_decision(r, [&](const GameState& s, int dp, Action a) {
      Task task = r.config.task;
      if (dp <= 3) {
        const auto& b = fit.guess.at(task)[dp - 1].beta;
        auto x = baseline_guess_features(s);
        double z = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) z += b[j] * x[j];
        nll += softplus_neg(a.is_guess() ? z : -z);
        ++terms;
      }
      if (a.is_guess()) {
        const auto& b = fit.row.at(task).beta;
        auto x = baseline_row_features(s);
        double z = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) z += b[j] * x[j];
        nll += softplus_neg(a.guessed_row() == Row::A ? z : -z);
        ++terms;
      }
    });
  }
  return nll / static_cast<double>(terms);
}

}  // namespace infoseek
