#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "infoseek/game.hpp"

namespace infoseek {

// A table cell: null (empty), numeric, or text. Probability cells always
// carry a companion n column; cells with n = 0 stay null, never 0.
using Cell = std::variant<std::monostate, double, std::string>;

struct AnalysisTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct CorrelationReport {
  std::string metric;
  int n = 0;
  double pearson_r = 0.0;
  double p_value = 1.0;  // two-sided, t approximation
  double mean_x = 0.0, sd_x = 0.0;
  double mean_y = 0.0, sd_y = 0.0;
};

// Sample Pearson correlation with a two-sided p-value from
// t = r sqrt((n-2)/(1-r^2)). Throws on n < 3 or a constant series.
CorrelationReport pearson(std::span<const double> x, std::span<const double> y,
                          const std::string& metric = "");

// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

// Two-sided tail probability of Student's t via the regularized incomplete
// beta function (continued fraction, accurate to ~1e-8 for df >= 3).
double student_t_two_sided_p(double t, int df);
double incomplete_beta(double a, double b, double x);

// Fig-1B analogue: per first-card value, P(guess at DP1) for each task and
// the MaxProd - MinProd difference.
AnalysisTable framing_effect(const std::vector<TrialRecord>& records);

// Fig-4 analogue: trials whose first two reveals hit both rows; cells keyed
// by (revealed value in the DP2-offered row, revealed value in the other
// row) -> P(accept the DP2 offer).
AnalysisTable approach_heatmap(const std::vector<TrialRecord>& records, Task task);

// Fig-5 analogue: DP1 guesses only; P(guess the first card's row) by first
// card value, split by whether the DP1 offer came from that same row.
AnalysisTable reject_unsampled(const std::vector<TrialRecord>& records, Task task);

struct SubjectMetrics {
  std::string subject_id;
  double mean_n_moves = 0.0;
  double accuracy = 0.0;
  double mean_score = 0.0;
  int n_trials = 0;
  std::optional<double> mean_log_decision_time;
};

// Per-subject averages, sorted by subject id.
std::vector<SubjectMetrics> subject_metrics(const std::vector<TrialRecord>& records);
AnalysisTable subject_metrics_table(const std::vector<TrialRecord>& records);

// Decile-style quantile buckets of a per-subject statistic; mean +- SEM of
// each embedding dimension per bucket. Ties broken by subject id.
AnalysisTable embedding_buckets(const std::map<std::string, std::vector<double>>& embeddings,
                                const std::map<std::string, double>& statistic,
                                int n_buckets = 10);

// Median split on an extrinsic per-subject parameter (median goes to "low").
AnalysisTable median_split(const std::map<std::string, std::vector<double>>& embeddings,
                           const std::map<std::string, double>& param);

// Mean +- SEM of each embedding dimension per category of a demographic
// field; subjects missing the field are skipped.
AnalysisTable categorical_buckets(const std::map<std::string, std::vector<double>>& embeddings,
                                  const std::map<std::string, std::string>& field);

}  // namespace infoseek
