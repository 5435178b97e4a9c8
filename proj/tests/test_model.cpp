#include <cmath>
#include <vector>

#include "doctest.h"
#include "infoseek/model.hpp"
#include "infoseek/pipeline.hpp"

using namespace infoseek;

namespace {

TrialConfig fixture_config(Task task = Task::MaxProd) {
  TrialConfig c;
  c.layout.values = {3, 8, 7, 2};  // A1=3 A2=8 B1=7 B2=2
  c.reveal_order = {CardPosition::parse("A1"), CardPosition::parse("B1"),
                    CardPosition::parse("A2"), CardPosition::parse("B2")};
  c.task = task;
  return c;
}

BehaviorModel make_model(ModelVariant variant, std::uint64_t seed = 7,
                         std::vector<std::string> subjects = {"s1", "s2"}) {
  ModelConfig mc;
  mc.variant = variant;
  mc.tasks = variant == ModelVariant::MultiDNN
                 ? std::vector<Task>{Task::MaxProd, Task::MinProd}
                 : std::vector<Task>{Task::MaxProd};
  Rng rng(seed);
  return BehaviorModel::init(mc, subjects, rng);
}

void zero_params(BehaviorModel& m) {
  std::vector<double> p;
  m.gather_params(p);
  std::fill(p.begin(), p.end(), 0.0);
  m.scatter_params(p);
}

TrialRecord record_with_moves(int n_moves, Task task = Task::MaxProd,
                              Row guess = Row::A, const std::string& subject = "s1") {
  std::vector<Action> actions;
  for (int i = 1; i < n_moves; ++i) actions.push_back(Action::parse("S"));
  actions.push_back(guess == Row::A ? Action::parse("GA") : Action::parse("GB"));
  return make_record(subject, "t", fixture_config(task), actions);
}

}  // namespace

TEST_CASE("all-zero weights give the uniform policy at every decision point") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN);
  zero_params(m);
  GameState s = GameState::start(fixture_config());
  for (int dp = 1; dp <= 3; ++dp) {
    ActionDistribution d = m.policy("s1", Task::MaxProd, s);
    CHECK(d.p_sample == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d.p_guess_a == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(d.p_guess_b == doctest::Approx(0.25).epsilon(1e-12));
    s = s.step(Action::parse("S"));
  }
  ActionDistribution d4 = m.policy("s1", Task::MaxProd, s);
  CHECK(d4.p_sample == 0.0);  // structurally forced guess
  CHECK(d4.p_guess_a == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("policy outputs are proper distributions with random weights") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN, 11);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    GameState s = GameState::start(generate_trial(rng, Task::MaxProd));
    while (!s.terminated()) {
      ActionDistribution d = m.policy("s1", Task::MaxProd, s);
      CHECK(d.p_sample >= 0.0);
      CHECK(d.p_guess_a >= 0.0);
      CHECK(d.p_guess_b >= 0.0);
      CHECK(d.p_sample + d.p_guess_a + d.p_guess_b == doctest::Approx(1.0).epsilon(1e-12));
      if (s.decision_point() == 4) CHECK(d.p_sample == 0.0);
      s = s.step(d.sample(rng));
    }
  }
}

TEST_CASE("policy matches an independent forward pass on stage 1") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN, 23);
  GameState s = GameState::start(fixture_config());
  ActionDistribution d = m.policy("s2", Task::MaxProd, s);

  // Rebuild stage 1 by hand: input = [feat ; embedding], two tanh layers,
  // linear heads on h2.
  const auto& stage = m.nets().at(Task::MaxProd)[0];
  const auto& layers = stage.graph.layers();
  std::vector<double> x = {(3 - 5.5) / 4.5, 1.0, 1.0, -1.0};  // A1=3, offer B1
  std::vector<double> emb = m.embed("s2");
  x.insert(x.end(), emb.begin(), emb.end());
  std::vector<double> h = x;
  for (int l = 0; l < 2; ++l) {
    const auto& L = layers[l];
    std::vector<double> y(L.out);
    for (int r = 0; r < L.out; ++r) {
      double acc = L.bias[r];
      for (int c = 0; c < L.in; ++c) acc += L.w(r, c) * h[c];
      y[r] = std::tanh(acc);
    }
    h = y;
  }
  auto head = [&](const nn::DenseLayer& L) {
    double acc = L.bias[0];
    for (int c = 0; c < L.in; ++c) acc += L.w(0, c) * h[c];
    return acc;
  };
  double g = head(layers[2]), r = head(layers[3]);
  double p_guess = 1.0 / (1.0 + std::exp(-g));
  double p_a = 1.0 / (1.0 + std::exp(-r));
  CHECK(d.p_sample == doctest::Approx(1.0 - p_guess).epsilon(1e-12));
  CHECK(d.p_guess_a == doctest::Approx(p_guess * p_a).epsilon(1e-12));
}

TEST_CASE("masked NLL term counts follow min(n_moves, 3) + 1") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN);
  CHECK(m.trial_nll(record_with_moves(1)).second == 2);
  CHECK(m.trial_nll(record_with_moves(2)).second == 3);
  CHECK(m.trial_nll(record_with_moves(3)).second == 4);
  CHECK(m.trial_nll(record_with_moves(4)).second == 4);
}

TEST_CASE("uniform model assigns ln 2 per decision") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN);
  zero_params(m);
  auto [nll, terms] = m.trial_nll(record_with_moves(1));
  CHECK(nll == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  std::vector<TrialRecord> data = {record_with_moves(1), record_with_moves(4),
                                   record_with_moves(2, Task::MaxProd, Row::B)};
  CHECK(m.dataset_nll(data) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("dataset NLL of a single record equals its trial ratio") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN, 31);
  TrialRecord r = record_with_moves(3);
  auto [nll, terms] = m.trial_nll(r);
  CHECK(m.dataset_nll({r}) == doctest::Approx(nll / terms).epsilon(1e-14));
}

TEST_CASE("trial NLL validates the record via replay") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN);
  TrialRecord r = record_with_moves(2);
  r.n_moves = 3;
  CHECK_THROWS_AS(m.trial_nll(r), ValidationError);
}

TEST_CASE("Pop-DNN is the zero-embedding special case of Subj-DNN") {
  BehaviorModel subj = make_model(ModelVariant::SubjDNN, 13);
  for (auto& [id, e] : subj.mutable_embeddings()) std::fill(e.begin(), e.end(), 0.0);
  BehaviorModel pop = make_model(ModelVariant::PopDNN, 99);
  pop.nets() = subj.nets();

  Rng rng(77);
  for (int i = 0; i < 30; ++i) {
    GameState s = GameState::start(generate_trial(rng, Task::MaxProd));
    while (!s.terminated()) {
      ActionDistribution ds = subj.policy("s1", Task::MaxProd, s);
      ActionDistribution dp = pop.policy("s1", Task::MaxProd, s);
      CHECK(ds.p_sample == doctest::Approx(dp.p_sample).epsilon(1e-14));
      CHECK(ds.p_guess_a == doctest::Approx(dp.p_guess_a).epsilon(1e-14));
      s = s.step(ds.sample(rng));
    }
  }
}

TEST_CASE("unknown subjects cold-start on the zero embedding") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN, 13);
  for (auto& [id, e] : m.mutable_embeddings()) std::fill(e.begin(), e.end(), 0.0);
  GameState s = GameState::start(fixture_config());
  ActionDistribution known = m.policy("s1", Task::MaxProd, s);
  ActionDistribution stranger = m.policy("nobody", Task::MaxProd, s);
  CHECK(known.p_sample == doctest::Approx(stranger.p_sample).epsilon(1e-14));
  CHECK_THROWS_AS(m.embed("nobody"), std::out_of_range);
}

TEST_CASE("embedding semantics per variant") {
  BehaviorModel pop = make_model(ModelVariant::PopDNN);
  std::vector<double> z = pop.embed("anyone");
  for (double v : z) CHECK(v == 0.0);

  BehaviorModel subj = make_model(ModelVariant::SubjDNN, 3);
  std::vector<double> e = subj.embed("s1");
  CHECK(e.size() == 2);
  for (double v : e) CHECK(std::abs(v) < 1.0);  // ~ N(0, 0.1^2)
}

TEST_CASE("missing task raises") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN);
  GameState s = GameState::start(fixture_config(Task::MinProd));
  CHECK_THROWS(m.policy("s1", Task::MinProd, s));
}

TEST_CASE("Multi-DNN serves both framings from one embedding table") {
  BehaviorModel m = make_model(ModelVariant::MultiDNN, 17);
  GameState smax = GameState::start(fixture_config(Task::MaxProd));
  GameState smin = GameState::start(fixture_config(Task::MinProd));
  ActionDistribution a = m.policy("s1", Task::MaxProd, smax);
  ActionDistribution b = m.policy("s1", Task::MinProd, smin);

  // Moving the shared embedding shifts both tasks' outputs.
  for (auto& [id, e] : m.mutable_embeddings())
    for (double& v : e) v += 3.0;
  ActionDistribution a2 = m.policy("s1", Task::MaxProd, smax);
  ActionDistribution b2 = m.policy("s1", Task::MinProd, smin);
  CHECK(a.p_sample != a2.p_sample);
  CHECK(b.p_sample != b2.p_sample);
}

TEST_CASE("accumulated gradients match finite differences, including embeddings") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN, 41);
  TrialRecord r = record_with_moves(3, Task::MaxProd, Row::B, "s2");

  std::vector<double> params;
  m.gather_params(params);
  std::vector<double> grads(params.size(), 0.0);
  auto [nll, terms] = m.accumulate_gradient(r, grads);
  CHECK(nll == doctest::Approx(m.trial_nll(r).first).epsilon(1e-12));

  Rng rng(1);
  int checked_embedding = 0;
  for (int probe = 0; probe < 60; ++probe) {
    std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, params.size() - 1));
    if (i >= params.size() - 4) ++checked_embedding;  // embedding block is last
    double h = 1e-6;
    std::vector<double> p = params;
    p[i] += h;
    m.scatter_params(p);
    double up = m.trial_nll(r).first;
    p[i] -= 2 * h;
    m.scatter_params(p);
    double down = m.trial_nll(r).first;
    m.scatter_params(params);
    double fd = (up - down) / (2 * h);
    CHECK(grads[i] == doctest::Approx(fd).epsilon(1e-4));
  }

  // The record's own embedding must receive gradient.
  double emb_grad_norm = 0.0;
  for (std::size_t i = params.size() - 2; i < params.size(); ++i)
    emb_grad_norm += std::abs(grads[i]);  // s2 is the last subject id
  CHECK(emb_grad_norm > 0.0);
}

TEST_CASE("stages after the guess point receive exactly zero gradient") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN, 47);
  TrialRecord r = record_with_moves(1);  // guess at DP1

  std::vector<double> grads(m.parameter_count(), 0.0);
  m.accumulate_gradient(r, grads);

  std::size_t offset = 0;
  const auto& stages = m.nets().at(Task::MaxProd);
  for (int k = 0; k < 4; ++k) {
    std::size_t count = stages[k].graph.parameter_count();
    if (k >= 1)
      for (std::size_t i = offset; i < offset + count; ++i) CHECK(grads[i] == 0.0);
    offset += count;
  }
}

TEST_CASE("rollout limits and determinism") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN, 19);
  zero_params(m);
  // Huge guess-head bias at stage 1 forces an immediate guess.
  auto& stage1 = m.nets().at(Task::MaxProd)[0];
  stage1.graph.layers()[2].bias[0] = 50.0;

  Rng rng(3);
  RolloutMetrics metrics = m.rollout("s1", fixture_config(), rng, 200);
  CHECK(metrics.mean_n_moves == doctest::Approx(1.0).epsilon(1e-9));
  // Without sampling every score is +50 or -60.
  CHECK((metrics.mean_score >= -60.0 - 1e-9));
  CHECK((metrics.mean_score <= 50.0 + 1e-9));

  Rng r1(5), r2(5);
  BehaviorModel m2 = make_model(ModelVariant::SubjDNN, 19);
  RolloutMetrics a = m2.rollout("s1", fixture_config(), r1, 100);
  RolloutMetrics b = m2.rollout("s1", fixture_config(), r2, 100);
  CHECK(a.mean_n_moves == b.mean_n_moves);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.mean_score == b.mean_score);
}

TEST_CASE("uniform-model rollout matches the half-guess chain expectation") {
  BehaviorModel m = make_model(ModelVariant::SubjDNN);
  zero_params(m);
  Rng rng(101);
  const int n = 10000;
  RolloutMetrics metrics = m.rollout("s1", fixture_config(), rng, n);
  // E[n_moves] = 1/2 + 2/4 + 3/8 + 4/8 = 1.875; sd of the mean ~ 0.0105.
  double expect = 1.0 * 0.5 + 2.0 * 0.25 + 3.0 * 0.125 + 4.0 * 0.125;
  double var = (1 * 0.5 + 4 * 0.25 + 9 * 0.125 + 16 * 0.125) - expect * expect;
  CHECK(std::abs(metrics.mean_n_moves - expect) < 3.0 * std::sqrt(var / n));
}
