// Command-line front end: gen-data, import, fit, eval, simulate, analyze,
// sample-complexity, gradcheck. Exit codes: 0 ok, 1 usage, 2 validation,
// 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "infoseek/agents.hpp"
#include "infoseek/analysis.hpp"
#include "infoseek/io.hpp"
#include "infoseek/model.hpp"
#include "infoseek/nn.hpp"
#include "infoseek/pipeline.hpp"

namespace {

using namespace infoseek;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

io::RunConfig load_config(const Options& opts) {
  io::RunConfig config;
  if (!opts.config_path.empty()) config = io::read_run_config(opts.config_path);
  if (opts.seed) {
    config.seed = *opts.seed;
    config.train.seed = *opts.seed;
  }
  if (!opts.out_dir.empty()) config.out_dir = opts.out_dir;
  return config;
}

void info(const Options& opts, const std::string& msg) {
  if (!opts.quiet) std::cout << msg << "\n";
}

int cmd_gen_data(const Options& opts) {
  io::RunConfig config = load_config(opts);
  io::stamp_output_dir(config, config.out_dir);

  Rng rng(config.seed);
  Rng pop_rng = rng.substream("population");
  std::vector<SubjectProfile> subjects =
      sample_population(pop_rng, config.generator.n_subjects, config.generator.distributions);

  std::vector<TrialRecord> records;
  Rng trial_rng = rng.substream("trials");
  for (const auto& subject : subjects)
    for (Task task : config.generator.tasks) {
      Rng sub = trial_rng.substream(subject.subject_id).substream(task_str(task));
      auto trials = simulate_subject(subject, task, config.generator.n_trials_per_task, sub);
      records.insert(records.end(), trials.begin(), trials.end());
    }

  io::write_subjects(subjects, config.out_dir / "subjects.csv");
  io::write_trials(records, config.out_dir / "trials.csv");
  info(opts, "wrote " + std::to_string(subjects.size()) + " subjects, " +
                 std::to_string(records.size()) + " trials to " + config.out_dir.string());
  return 0;
}

int cmd_import(const Options& opts, const std::string& input,
               const std::vector<std::string>& map_args) {
  io::RunConfig config = load_config(opts);
  io::stamp_output_dir(config, config.out_dir);

  io::ColumnMapping mapping;
  for (const auto& arg : map_args) {
    auto eq = arg.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--map", "expected canonical=source, got '" + arg + "'");
    mapping.columns[arg.substr(0, eq)] = arg.substr(eq + 1);
  }

  io::ImportReport report =
      io::import_external(input, mapping, config.out_dir / "trials.csv");
  info(opts, "imported " + std::to_string(report.n_imported) + " rows, dropped " +
                 std::to_string(report.n_dropped));
  if (!opts.quiet)
    for (const auto& d : report.diagnostics) std::cerr << d << "\n";
  return 0;
}

AnalysisTable training_log_table(const ModelCheckpoint& ckpt) {
  AnalysisTable t;
  t.name = "training_log";
  t.columns = {"epoch", "train_nll", "stopping_nll"};
  for (const auto& e : ckpt.log)
    t.rows.push_back({static_cast<double>(e.epoch), e.train_nll, e.stopping_nll});
  return t;
}

int cmd_fit(const Options& opts, const std::string& trials_path) {
  io::RunConfig config = load_config(opts);
  io::stamp_output_dir(config, config.out_dir);

  std::vector<TrialRecord> records = io::read_trials(trials_path);
  DatasetSplit parts = split(records, SplitSpec{}, Rng(config.seed).substream("split"));
  for (const auto& id : parts.excluded_subjects)
    if (!opts.quiet) std::cerr << "excluded subject '" << id << "' (too few trials)\n";

  ModelCheckpoint ckpt = train(parts, config.train);
  save_checkpoint(ckpt, config.out_dir / "checkpoint.json");
  io::write_table_csv(training_log_table(ckpt), config.out_dir / "training_log.csv");
  info(opts, "trained " + variant_str(config.train.variant) + " for " +
                 std::to_string(ckpt.log.back().epoch) + " epochs; best stopping NLL " +
                 io::format_real(ckpt.log.back().stopping_nll));
  return 0;
}

std::vector<TrialRecord> model_task_records(const BehaviorModel& model,
                                            const std::vector<TrialRecord>& records) {
  std::vector<TrialRecord> out;
  for (const auto& r : records)
    if (model.has_task(r.config.task)) out.push_back(r);
  return out;
}

int cmd_eval(const Options& opts, const std::string& trials_path,
             const std::string& checkpoint_path) {
  ModelCheckpoint ckpt = load_checkpoint(checkpoint_path);
  std::vector<TrialRecord> records =
      model_task_records(ckpt.model, io::read_trials(trials_path));
  if (records.empty()) throw ValidationError("no trials match the model's tasks");
  std::printf("nll=%s\n", io::format_real(ckpt.model.dataset_nll(records)).c_str());
  return 0;
}

int cmd_simulate(const Options& opts, const std::string& trials_path,
                 const std::string& checkpoint_path, int n_rollouts) {
  io::RunConfig config = load_config(opts);
  io::stamp_output_dir(config, config.out_dir);

  ModelCheckpoint ckpt = load_checkpoint(checkpoint_path);
  std::vector<TrialRecord> records =
      model_task_records(ckpt.model, io::read_trials(trials_path));

  std::map<std::string, std::vector<const TrialRecord*>> by_subject;
  for (const auto& r : records) by_subject[r.subject_id].push_back(&r);

  AnalysisTable t;
  t.name = "simulated_subject_metrics";
  t.columns = {"subject_id", "n_trials", "mean_n_moves", "accuracy", "mean_score"};
  Rng rng = Rng(config.seed).substream("simulate");
  for (const auto& [id, trials] : by_subject) {
    RolloutMetrics agg;
    Rng sub = rng.substream(id);
    for (const TrialRecord* r : trials) {
      RolloutMetrics m = ckpt.model.rollout(id, r->config, sub, n_rollouts);
      agg.mean_n_moves += m.mean_n_moves;
      agg.accuracy += m.accuracy;
      agg.mean_score += m.mean_score;
    }
    double inv = 1.0 / static_cast<double>(trials.size());
    t.rows.push_back({id, static_cast<double>(trials.size()), agg.mean_n_moves * inv,
                      agg.accuracy * inv, agg.mean_score * inv});
  }
  io::write_table_csv(t, config.out_dir / "simulated_subject_metrics.csv");
  info(opts, "simulated " + std::to_string(by_subject.size()) + " subjects");
  return 0;
}

AnalysisTable metrics_correlation_table(const BehaviorModel& model,
                                        const std::vector<TrialRecord>& records,
                                        int n_rollouts, Rng rng) {
  std::map<std::string, std::vector<const TrialRecord*>> by_subject;
  for (const auto& r : records) by_subject[r.subject_id].push_back(&r);

  std::vector<double> m_moves, m_acc, m_score, h_moves, h_acc, h_score;
  for (const auto& [id, trials] : by_subject) {
    RolloutMetrics agg;
    double hm = 0, ha = 0, hs = 0;
    Rng sub = rng.substream(id);
    for (const TrialRecord* r : trials) {
      RolloutMetrics m = model.rollout(id, r->config, sub, n_rollouts);
      agg.mean_n_moves += m.mean_n_moves;
      agg.accuracy += m.accuracy;
      agg.mean_score += m.mean_score;
      hm += r->n_moves;
      ha += r->correct ? 1.0 : 0.0;
      hs += r->score;
    }
    double inv = 1.0 / static_cast<double>(trials.size());
    m_moves.push_back(agg.mean_n_moves * inv);
    m_acc.push_back(agg.accuracy * inv);
    m_score.push_back(agg.mean_score * inv);
    h_moves.push_back(hm * inv);
    h_acc.push_back(ha * inv);
    h_score.push_back(hs * inv);
  }

  AnalysisTable t;
  t.name = "metrics_correlation";
  t.columns = {"metric", "n", "pearson_r", "p_value"};
  auto add = [&](const std::string& name, const std::vector<double>& x,
                 const std::vector<double>& y) {
    try {
      CorrelationReport r = pearson(x, y, name);
      t.rows.push_back({name, static_cast<double>(r.n), r.pearson_r, r.p_value});
    } catch (const std::invalid_argument&) {
      t.rows.push_back({name, static_cast<double>(x.size()), Cell{}, Cell{}});
    }
  };
  add("n_moves", m_moves, h_moves);
  add("accuracy", m_acc, h_acc);
  add("score", m_score, h_score);
  return t;
}

int cmd_analyze(const Options& opts, const std::string& trials_path,
                const std::string& checkpoint_path, const std::string& subjects_path,
                std::vector<std::string> figures) {
  io::RunConfig config = load_config(opts);
  io::stamp_output_dir(config, config.out_dir);

  static const std::set<std::string> known = {"framing",       "approach",
                                             "reject",        "metrics-correlation",
                                             "embedding-buckets", "median-split"};
  if (figures.empty())
    figures.assign(known.begin(), known.end());
  for (const auto& f : figures)
    if (!known.count(f)) throw CLI::ValidationError("--figure", "unknown figure '" + f + "'");

  std::vector<TrialRecord> records = io::read_trials(trials_path);
  std::optional<ModelCheckpoint> ckpt;
  auto need_model = [&]() -> ModelCheckpoint& {
    if (!ckpt) {
      if (checkpoint_path.empty())
        throw ValidationError("this figure needs --checkpoint");
      ckpt = load_checkpoint(checkpoint_path);
    }
    return *ckpt;
  };

  for (const auto& figure : figures) {
    AnalysisTable t;
    if (figure == "framing") {
      t = framing_effect(records);
    } else if (figure == "approach") {
      t = approach_heatmap(records, config.train.task);
    } else if (figure == "reject") {
      t = reject_unsampled(records, config.train.task);
    } else if (figure == "metrics-correlation") {
      ModelCheckpoint& c = need_model();
      t = metrics_correlation_table(c.model, model_task_records(c.model, records),
                                    config.sample_complexity.rollouts_per_trial,
                                    Rng(config.seed).substream("analyze"));
    } else if (figure == "embedding-buckets") {
      ModelCheckpoint& c = need_model();
      std::map<std::string, double> stat;
      std::map<std::string, std::pair<double, int>> acc;
      for (const auto& r : records)
        if (c.model.embeddings().count(r.subject_id)) {
          acc[r.subject_id].first += r.n_moves;
          acc[r.subject_id].second += 1;
        }
      for (const auto& [id, a] : acc) stat[id] = a.first / a.second;
      t = embedding_buckets(c.model.embeddings(), stat);
    } else {  // median-split
      ModelCheckpoint& c = need_model();
      if (subjects_path.empty())
        throw ValidationError("median-split needs --subjects");
      std::map<std::string, double> param;
      for (const auto& s : io::read_subjects(subjects_path))
        if (s.approach_param && c.model.embeddings().count(s.subject_id))
          param[s.subject_id] = *s.approach_param;
      t = median_split(c.model.embeddings(), param);
    }
    std::string stem = figure;
    for (char& ch : stem)
      if (ch == '-') ch = '_';
    io::write_table_csv(t, config.out_dir / (stem + ".csv"));
    info(opts, "wrote " + stem + ".csv (" + std::to_string(t.rows.size()) + " rows)");
  }
  return 0;
}

int cmd_sample_complexity(const Options& opts, const std::string& trials_path) {
  io::RunConfig config = load_config(opts);
  io::stamp_output_dir(config, config.out_dir);

  if (config.sample_complexity.pool_sizes.empty())
    config.sample_complexity.pool_sizes = {200, 500, 1000, 2000};
  std::vector<TrialRecord> records = io::read_trials(trials_path);
  SampleComplexityResult result = sample_complexity(
      records, config.train, config.sample_complexity, Rng(config.seed).substream("sc"));
  io::write_table_csv(result.detail, config.out_dir / "sample_complexity_detail.csv");
  io::write_table_csv(result.summary, config.out_dir / "sample_complexity_summary.csv");
  info(opts, "wrote sample_complexity_{detail,summary}.csv");
  return 0;
}

int cmd_gradcheck(const Options& opts, int n_graphs, int n_probes) {
  io::RunConfig config = load_config(opts);
  Rng rng(config.seed);
  double max_err = 0.0;
  for (int i = 0; i < n_graphs; ++i) {
    Rng sub = rng.substream("gradcheck").substream(static_cast<std::uint64_t>(i));
    nn::Graph g = nn::random_graph(sub);
    nn::GradCheckReport report = nn::grad_check(g, sub, n_probes);
    max_err = std::max(max_err, report.max_rel_error);
  }
  std::printf("max_rel_error=%s\n", io::format_real(max_err).c_str());
  if (max_err >= 1e-4) {
    std::cerr << "gradient check failed (threshold 1e-4)\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential information-seeking task: data, models, analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", infoseek::io::kToolVersion);

  Options opts;
  std::uint64_t seed_arg = 0;
  app.add_option("--config", opts.config_path, "run-config JSON path");
  auto* seed_opt = app.add_option("--seed", seed_arg, "master seed (overrides config)");
  app.add_option("--out", opts.out_dir, "output directory (overrides config)");
  app.add_flag("--quiet", opts.quiet, "suppress progress output");

  std::string trials_path, checkpoint_path, subjects_path, input_path;
  std::vector<std::string> map_args, figures;
  int n_rollouts = 20, n_graphs = 100, n_probes = 10;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic population and trials");
  auto* imp = app.add_subcommand("import", "convert an external trials log to canonical form");
  imp->add_option("--input", input_path, "source CSV")->required();
  imp->add_option("--map", map_args, "canonical=source column mapping (repeatable)");
  auto* fit = app.add_subcommand("fit", "train a behavior model");
  fit->add_option("--trials", trials_path, "trials CSV")->required();
  auto* eval = app.add_subcommand("eval", "mean NLL of a checkpoint on a trials file");
  eval->add_option("--trials", trials_path, "trials CSV")->required();
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  auto* sim = app.add_subcommand("simulate", "per-subject rollout metrics");
  sim->add_option("--trials", trials_path, "trials CSV")->required();
  sim->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  sim->add_option("--rollouts", n_rollouts, "rollouts per trial");
  auto* ana = app.add_subcommand("analyze", "figure-analogue tables");
  ana->add_option("--trials", trials_path, "trials CSV")->required();
  ana->add_option("--checkpoint", checkpoint_path, "checkpoint JSON (model figures)");
  ana->add_option("--subjects", subjects_path, "subjects CSV (median-split)");
  ana->add_option("--figure", figures,
                  "framing|approach|reject|metrics-correlation|embedding-buckets|median-split"
                  " (repeatable; default all applicable)");
  auto* sc = app.add_subcommand("sample-complexity", "training-pool-size experiment");
  sc->add_option("--trials", trials_path, "trials CSV")->required();
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  gc->add_option("--graphs", n_graphs, "random architectures to test");
  gc->add_option("--probes", n_probes, "parameter probes per architecture");

  // Global flags may follow the subcommand name.
  for (CLI::App* sub : {gen, imp, fit, eval, sim, ana, sc, gc}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (seed_opt->count()) opts.seed = seed_arg;

  try {
    if (gen->parsed()) return cmd_gen_data(opts);
    if (imp->parsed()) return cmd_import(opts, input_path, map_args);
    if (fit->parsed()) return cmd_fit(opts, trials_path);
    if (eval->parsed()) return cmd_eval(opts, trials_path, checkpoint_path);
    if (sim->parsed()) return cmd_simulate(opts, trials_path, checkpoint_path, n_rollouts);
    if (ana->parsed())
      return cmd_analyze(opts, trials_path, checkpoint_path, subjects_path, figures);
    if (sc->parsed()) return cmd_sample_complexity(opts, trials_path);
    if (gc->parsed()) return cmd_gradcheck(opts, n_graphs, n_probes);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const infoseek::nn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const infoseek::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
