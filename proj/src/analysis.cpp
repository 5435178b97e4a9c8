#include "infoseek/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace infoseek {

namespace {

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  int n = 0;
};

MeanSd mean_sd(std::span<const double> v) {
  MeanSd out;
  out.n = static_cast<int>(v.size());
  if (out.n == 0) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / (out.n - 1));
  }
  return out;
}

double sem_of(const MeanSd& m) { return m.n > 1 ? m.sd / std::sqrt(m.n) : 0.0; }

Cell prob_cell(long hits, long n) {
  if (n == 0) return std::monostate{};
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Regularized I_x(a,b) via the Lentz continued fraction.
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log(1.0 - x);
  bool swap = x >= (a + 1.0) / (a + b + 2.0);
  if (swap) {
    std::swap(a, b);
    x = 1.0 - x;
  }
  const double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-12) break;
  }
  double result = std::exp(ln_front) * h / a;
  return swap ? 1.0 - result : result;
}

double student_t_two_sided_p(double t, int df) {
  if (df < 1) throw std::invalid_argument("student_t_two_sided_p: df must be >= 1");
  if (!std::isfinite(t)) return 0.0;
  double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

CorrelationReport pearson(std::span<const double> x, std::span<const double> y,
                          const std::string& metric) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  int n = static_cast<int>(x.size());
  if (n < 3) throw std::invalid_argument("pearson: need n >= 3");

  MeanSd mx = mean_sd(x);
  MeanSd my = mean_sd(y);
  if (mx.sd == 0.0 || my.sd == 0.0)
    throw std::invalid_argument("pearson: correlation undefined for a constant series");

  double cov = 0.0;
  for (int i = 0; i < n; ++i) cov += (x[i] - mx.mean) * (y[i] - my.mean);
  cov /= n - 1;
  double r = std::clamp(cov / (mx.sd * my.sd), -1.0, 1.0);

  CorrelationReport rep;
  rep.metric = metric;
  rep.n = n;
  rep.pearson_r = r;
  if (std::abs(r) >= 1.0) {
    rep.p_value = 0.0;
  } else {
    double t = r * std::sqrt((n - 2) / (1.0 - r * r));
    rep.p_value = student_t_two_sided_p(t, n - 2);
  }
  rep.mean_x = mx.mean;
  rep.sd_x = mx.sd;
  rep.mean_y = my.mean;
  rep.sd_y = my.sd;
  return rep;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  int n = static_cast<int>(v.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  int i = 0;
  while (i < n) {
    int j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = (i + j) / 2.0 + 1.0;
    for (int k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  std::vector<double> rx = ranks(x);
  std::vector<double> ry = ranks(y);
  return pearson(rx, ry).pearson_r;
}

AnalysisTable framing_effect(const std::vector<TrialRecord>& records) {
  AnalysisTable t;
  t.name = "framing_effect";
  t.columns = {"first_card_value", "p_guess_max", "n_max", "p_guess_min", "n_min", "diff"};
  std::array<std::array<long, 2>, 10> guesses{};  // [value-1][task]
  std::array<std::array<long, 2>, 10> totals{};
  for (const auto& r : records) {
    int v = r.config.layout.value(r.config.reveal_order[0]);
    int ti = r.config.task == Task::MaxProd ? 0 : 1;
    ++totals[v - 1][ti];
    if (r.n_moves == 1) ++guesses[v - 1][ti];
  }
  for (int v = 1; v <= 10; ++v) {
    long nmax = totals[v - 1][0], nmin = totals[v - 1][1];
    Cell pmax = prob_cell(guesses[v - 1][0], nmax);
    Cell pmin = prob_cell(guesses[v - 1][1], nmin);
    Cell diff = std::monostate{};
    if (nmax > 0 && nmin > 0) diff = std::get<double>(pmax) - std::get<double>(pmin);
    t.rows.push_back({static_cast<double>(v), pmax, static_cast<double>(nmax), pmin,
                      static_cast<double>(nmin), diff});
  }
  return t;
}

AnalysisTable approach_heatmap(const std::vector<TrialRecord>& records, Task task) {
  AnalysisTable t;
  t.name = "approach_heatmap";
  t.columns = {"offered_row_value", "other_row_value", "p_accept", "n"};
  long accepts[10][10] = {};
  long totals[10][10] = {};
  for (const auto& r : records) {
    if (r.config.task != task) continue;
    if (r.n_moves < 2) continue;
    Row first_row = r.config.reveal_order[0].row;
    Row second_row = r.config.reveal_order[1].row;
    if (first_row == second_row) continue;
    Row offer_row = r.config.reveal_order[2].row;
    int v_offer = r.config.layout.value(offer_row == first_row ? r.config.reveal_order[0]
                                                               : r.config.reveal_order[1]);
    int v_other = r.config.layout.value(offer_row == first_row ? r.config.reveal_order[1]
                                                               : r.config.reveal_order[0]);
    ++totals[v_offer - 1][v_other - 1];
    if (r.n_moves > 2) ++accepts[v_offer - 1][v_other - 1];  // sampled at DP2
  }
  for (int a = 1; a <= 10; ++a)
    for (int b = 1; b <= 10; ++b)
      t.rows.push_back({static_cast<double>(a), static_cast<double>(b),
                        prob_cell(accepts[a - 1][b - 1], totals[a - 1][b - 1]),
                        static_cast<double>(totals[a - 1][b - 1])});
  return t;
}

AnalysisTable reject_unsampled(const std::vector<TrialRecord>& records, Task task) {
  AnalysisTable t;
  t.name = "reject_unsampled";
  t.columns = {"first_card_value", "p_guess_ref_same", "n_same",
               "p_guess_ref_other", "n_other", "diff"};
  // [value-1][0: offer same row as first card, 1: other row]
  std::array<std::array<long, 2>, 10> hits{};
  std::array<std::array<long, 2>, 10> totals{};
  for (const auto& r : records) {
    if (r.config.task != task) continue;
    if (r.n_moves != 1) continue;
    Row ref = r.config.reveal_order[0].row;
    int v = r.config.layout.value(r.config.reveal_order[0]);
    int side = r.config.reveal_order[1].row == ref ? 0 : 1;
    ++totals[v - 1][side];
    if (r.actions.back().guessed_row() == ref) ++hits[v - 1][side];
  }
  for (int v = 1; v <= 10; ++v) {
    long ns = totals[v - 1][0], no = totals[v - 1][1];
    Cell ps = prob_cell(hits[v - 1][0], ns);
    Cell po = prob_cell(hits[v - 1][1], no);
    Cell diff = std::monostate{};
    if (ns > 0 && no > 0) diff = std::get<double>(ps) - std::get<double>(po);
    t.rows.push_back({static_cast<double>(v), ps, static_cast<double>(ns), po,
                      static_cast<double>(no), diff});
  }
  return t;
}

std::vector<SubjectMetrics> subject_metrics(const std::vector<TrialRecord>& records) {
  struct Acc {
    double moves = 0, correct = 0, score = 0, log_dt = 0;
    int n = 0, n_dt = 0;
  };
  std::map<std::string, Acc> accs;
  for (const auto& r : records) {
    Acc& a = accs[r.subject_id];
    a.moves += r.n_moves;
    a.correct += r.correct ? 1.0 : 0.0;
    a.score += r.score;
    ++a.n;
    if (r.decision_time_ms) {
      a.log_dt += std::log(*r.decision_time_ms);
      ++a.n_dt;
    }
  }
  std::vector<SubjectMetrics> out;
  out.reserve(accs.size());
  for (const auto& [id, a] : accs) {
    SubjectMetrics m;
    m.subject_id = id;
    m.mean_n_moves = a.moves / a.n;
    m.accuracy = a.correct / a.n;
    m.mean_score = a.score / a.n;
    m.n_trials = a.n;
    if (a.n_dt > 0) m.mean_log_decision_time = a.log_dt / a.n_dt;
    out.push_back(std::move(m));
  }
  return out;
}

AnalysisTable subject_metrics_table(const std::vector<TrialRecord>& records) {
  AnalysisTable t;
  t.name = "subject_metrics";
  t.columns = {"subject_id", "mean_n_moves", "accuracy", "mean_score", "n_trials",
               "mean_log_decision_time"};
  for (const auto& m : subject_metrics(records)) {
    Cell dt = std::monostate{};
    if (m.mean_log_decision_time) dt = *m.mean_log_decision_time;
    t.rows.push_back({m.subject_id, m.mean_n_moves, m.accuracy, m.mean_score,
                      static_cast<double>(m.n_trials), dt});
  }
  return t;
}

namespace {

// Shared bucket summarizer: rows of (label, n, stat_mean, mean/sem per dim).
void append_bucket_row(AnalysisTable& t, const Cell& label,
                       const std::vector<const std::vector<double>*>& members,
                       const std::vector<double>& stats) {
  std::size_t dims = members.empty() ? 0 : members.front()->size();
  std::vector<Cell> row = {label, static_cast<double>(members.size())};
  row.push_back(stats.empty() ? Cell{std::monostate{}}
                              : Cell{mean_sd(stats).mean});
  for (std::size_t d = 0; d < dims; ++d) {
    std::vector<double> vals;
    vals.reserve(members.size());
    for (const auto* e : members) vals.push_back((*e)[d]);
    MeanSd ms = mean_sd(vals);
    row.push_back(ms.mean);
    row.push_back(sem_of(ms));
  }
  t.rows.push_back(std::move(row));
}

std::vector<std::string> bucket_columns(const std::string& label_col, std::size_t dims) {
  std::vector<std::string> cols = {label_col, "n", "stat_mean"};
  for (std::size_t d = 0; d < dims; ++d) {
    cols.push_back("mean_dim" + std::to_string(d + 1));
    cols.push_back("sem_dim" + std::to_string(d + 1));
  }
  return cols;
}

}  // namespace

AnalysisTable embedding_buckets(const std::map<std::string, std::vector<double>>& embeddings,
                                const std::map<std::string, double>& statistic,
                                int n_buckets) {
  if (n_buckets < 1) throw std::invalid_argument("n_buckets must be >= 1");
  std::vector<std::pair<std::string, double>> subjects;
  for (const auto& [id, e] : embeddings) {
    auto it = statistic.find(id);
    if (it == statistic.end())
      throw std::invalid_argument("statistic missing for subject '" + id + "'");
    subjects.emplace_back(id, it->second);
  }
  if (static_cast<int>(subjects.size()) < n_buckets)
    throw std::invalid_argument("fewer subjects than buckets");
  // Stable tie-break by subject id (already sorted by id; stable sort on value).
  std::stable_sort(subjects.begin(), subjects.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });

  std::size_t dims = embeddings.begin()->second.size();
  AnalysisTable t;
  t.name = "embedding_buckets";
  t.columns = bucket_columns("bucket", dims);
  std::size_t n = subjects.size();
  for (int b = 0; b < n_buckets; ++b) {
    std::size_t lo = n * b / n_buckets;
    std::size_t hi = n * (b + 1) / n_buckets;
    std::vector<const std::vector<double>*> members;
    std::vector<double> stats;
    for (std::size_t i = lo; i < hi; ++i) {
      members.push_back(&embeddings.at(subjects[i].first));
      stats.push_back(subjects[i].second);
    }
    append_bucket_row(t, static_cast<double>(b + 1), members, stats);
  }
  return t;
}

AnalysisTable median_split(const std::map<std::string, std::vector<double>>& embeddings,
                           const std::map<std::string, double>& param) {
  std::vector<std::pair<std::string, double>> subjects;
  for (const auto& [id, e] : embeddings) {
    auto it = param.find(id);
    if (it != param.end()) subjects.emplace_back(id, it->second);
  }
  if (subjects.size() < 4)
    throw std::invalid_argument("median_split: need the parameter for >= 4 subjects");
  std::vector<double> vals;
  for (const auto& [_, v] : subjects) vals.push_back(v);
  std::sort(vals.begin(), vals.end());
  if (vals.front() == vals.back())
    throw std::invalid_argument("median_split: parameter is constant");
  double median = vals[(vals.size() - 1) / 2];  // attained value; goes to "low"

  std::size_t dims = embeddings.begin()->second.size();
  AnalysisTable t;
  t.name = "median_split";
  t.columns = bucket_columns("bucket", dims);
  for (const std::string& side : {std::string("low"), std::string("high")}) {
    std::vector<const std::vector<double>*> members;
    std::vector<double> stats;
    for (const auto& [id, v] : subjects) {
      bool low = v <= median;
      if (low == (side == "low")) {
        members.push_back(&embeddings.at(id));
        stats.push_back(v);
      }
    }
    append_bucket_row(t, side, members, stats);
  }
  return t;
}

AnalysisTable categorical_buckets(const std::map<std::string, std::vector<double>>& embeddings,
                                  const std::map<std::string, std::string>& field) {
  std::map<std::string, std::vector<const std::vector<double>*>> groups;
  std::map<std::string, std::vector<double>> group_stats;
  for (const auto& [id, e] : embeddings) {
    auto it = field.find(id);
    if (it == field.end() || it->second.empty()) continue;
    groups[it->second].push_back(&e);
  }
  std::size_t dims = embeddings.empty() ? 0 : embeddings.begin()->second.size();
  AnalysisTable t;
  t.name = "categorical_buckets";
  t.columns = bucket_columns("category", dims);
  for (const auto& [cat, members] : groups)
    append_bucket_row(t, cat, members, {});
  return t;
}

}  // namespace infoseek
