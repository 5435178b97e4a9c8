#include "infoseek/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace infoseek {

using nlohmann::json;

DatasetSplit split(const std::vector<TrialRecord>& dataset, const SplitSpec& spec, Rng rng) {
  if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0 ||
      spec.stopping_fraction <= 0.0 || spec.stopping_fraction >= 1.0)
    throw std::invalid_argument("split fractions must lie in (0,1)");

  std::map<std::string, std::map<Task, std::vector<std::size_t>>> by_subject;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    by_subject[dataset[i].subject_id][dataset[i].config.task].push_back(i);

  DatasetSplit out;
  for (const auto& [subject, tasks] : by_subject) {
    bool ok = true;
    for (const auto& [task, idxs] : tasks)
      if (static_cast<int>(idxs.size()) < spec.min_trials_per_task) ok = false;
    if (!ok) {
      out.excluded_subjects.push_back(subject);
      continue;
    }
    for (const auto& [task, idxs] : tasks) {
      std::vector<std::size_t> order = idxs;
      Rng sub = rng.substream(subject).substream(task_str(task));
      sub.shuffle(order);
      std::size_t n = order.size();
      std::size_t share = static_cast<std::size_t>(std::ceil(spec.train_fraction * n));
      std::size_t stop = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(spec.stopping_fraction * share)));
      for (std::size_t i = 0; i < n; ++i) {
        const TrialRecord& r = dataset[order[i]];
        if (i < share - stop)
          out.train.push_back(r);
        else if (i < share)
          out.stopping.push_back(r);
        else
          out.validation.push_back(r);
      }
    }
  }
  return out;
}

namespace {

std::vector<Task> model_tasks(const TrainConfig& config) {
  if (config.variant == ModelVariant::MultiDNN) return {Task::MaxProd, Task::MinProd};
  return {config.task};
}

std::vector<TrialRecord> filter_tasks(const std::vector<TrialRecord>& records,
                                      const std::vector<Task>& tasks) {
  std::vector<TrialRecord> out;
  for (const auto& r : records)
    if (std::find(tasks.begin(), tasks.end(), r.config.task) != tasks.end())
      out.push_back(r);
  return out;
}

}  // namespace

ModelCheckpoint train(const DatasetSplit& data, const TrainConfig& config) {
  std::vector<Task> tasks = model_tasks(config);
  std::vector<TrialRecord> train_set = filter_tasks(data.train, tasks);
  std::vector<TrialRecord> stop_set = filter_tasks(data.stopping, tasks);
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  if (stop_set.empty()) throw std::invalid_argument("train: empty stopping set");

  std::set<std::string> subject_set;
  for (const auto& r : train_set) subject_set.insert(r.subject_id);
  for (const auto& r : stop_set) subject_set.insert(r.subject_id);
  std::vector<std::string> subjects(subject_set.begin(), subject_set.end());

  Rng master(config.seed);
  ModelConfig mc;
  mc.variant = config.variant;
  mc.hidden_dim = config.hidden_dim;
  mc.embedding_dim = config.embedding_dim;
  mc.tasks = tasks;
  Rng init_rng = master.substream("init");
  BehaviorModel model = BehaviorModel::init(mc, subjects, init_rng);

  std::vector<double> params;
  model.gather_params(params);
  nn::AdamConfig ac;
  ac.lr = config.lr;
  nn::Adam adam(params.size(), ac);
  std::vector<double> grads(params.size(), 0.0);

  ModelCheckpoint ckpt;
  ckpt.config = config;
  ckpt.log.push_back({0, model.dataset_nll(train_set), model.dataset_nll(stop_set)});

  double best_stop = ckpt.log.back().stopping_nll;
  std::vector<double> best_params = params;
  int stale_epochs = 0;

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  Rng epoch_rng = master.substream("epochs");
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng perm = epoch_rng.substream(static_cast<std::uint64_t>(epoch));
    perm.shuffle(order);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grads.begin(), grads.end(), 0.0);
      double batch_nll = 0.0;
      long batch_terms = 0;
      for (std::size_t i = start; i < end; ++i) {
        auto [nll, terms] = model.accumulate_gradient(train_set[order[i]], grads);
        batch_nll += nll;
        batch_terms += terms;
      }
      if (!std::isfinite(batch_nll))
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch starting at record " + std::to_string(start));
      double inv = 1.0 / static_cast<double>(batch_terms);
      for (double& g : grads) g *= inv;
      adam.step(params, grads);
      model.scatter_params(params);
    }

    double train_nll = model.dataset_nll(train_set);
    double stop_nll = model.dataset_nll(stop_set);
    ckpt.log.push_back({epoch, train_nll, stop_nll});

    if (stop_nll < best_stop - config.min_delta) {
      best_stop = stop_nll;
      best_params = params;
      stale_epochs = 0;
    } else {
      if (stop_nll < best_stop) {
        best_stop = stop_nll;
        best_params = params;
      }
      ++stale_epochs;
      if (stale_epochs >= config.patience) break;
    }
  }

  model.scatter_params(best_params);
  ckpt.model = std::move(model);
  return ckpt;
}

namespace {

constexpr const char* kCheckpointFormat = "infoseek-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json layer_to_json(const nn::DenseLayer& l) {
  json rows = json::array();
  for (int r = 0; r < l.out; ++r) {
    json row = json::array();
    for (int c = 0; c < l.in; ++c) row.push_back(l.w(r, c));
    rows.push_back(std::move(row));
  }
  return {{"out", l.out},
          {"in", l.in},
          {"activation", l.activation == nn::Activation::Tanh ? "tanh" : "identity"},
          {"weights", std::move(rows)},
          {"bias", l.bias}};
}

void layer_from_json(const json& j, nn::DenseLayer& l) {
  if (j.at("out").get<int>() != l.out || j.at("in").get<int>() != l.in)
    throw ValidationError("checkpoint layer shape mismatch");
  std::string act = j.at("activation").get<std::string>();
  if (act != (l.activation == nn::Activation::Tanh ? "tanh" : "identity"))
    throw ValidationError("checkpoint layer activation mismatch");
  const json& rows = j.at("weights");
  for (int r = 0; r < l.out; ++r)
    for (int c = 0; c < l.in; ++c) l.w(r, c) = rows.at(r).at(c).get<double>();
  l.bias = j.at("bias").get<std::vector<double>>();
  if (static_cast<int>(l.bias.size()) != l.out)
    throw ValidationError("checkpoint bias length mismatch");
}

json config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"min_delta", c.min_delta},
          {"seed", c.seed},
          {"variant", variant_str(c.variant)},
          {"embedding_dim", c.embedding_dim},
          {"hidden_dim", c.hidden_dim},
          {"task", task_str(c.task)}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.lr = j.at("lr").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.min_delta = j.at("min_delta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.task = parse_task(j.at("task").get<std::string>());
  return c;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& checkpoint, const std::filesystem::path& path) {
  json nets = json::object();
  for (const auto& [task, stages] : checkpoint.model.nets()) {
    json jstages = json::array();
    for (const auto& s : stages) {
      json jlayers = json::array();
      for (const auto& l : s.graph.layers()) jlayers.push_back(layer_to_json(l));
      jstages.push_back(std::move(jlayers));
    }
    nets[task_str(task)] = std::move(jstages);
  }
  json embeddings = json::object();
  for (const auto& [id, e] : checkpoint.model.embeddings()) embeddings[id] = e;

  json log = json::array();
  for (const auto& entry : checkpoint.log)
    log.push_back({{"epoch", entry.epoch},
                   {"train_nll", entry.train_nll},
                   {"stopping_nll", entry.stopping_nll}});

  json j = {{"format", kCheckpointFormat},
            {"version", checkpoint.format_version},
            {"config", config_to_json(checkpoint.config)},
            {"nets", std::move(nets)},
            {"embeddings", std::move(embeddings)},
            {"log", std::move(log)}};
  j["checksum"] = fnv1a_hex(j.dump());

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << "\n";
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed checkpoint '" + path.string() + "': " + e.what());
  }
  if (!j.contains("format") || j.at("format") != kCheckpointFormat)
    throw ValidationError("not a checkpoint file: '" + path.string() + "'");
  int version = j.at("version").get<int>();
  if (version != kCheckpointVersion)
    throw ValidationError("checkpoint version " + std::to_string(version) +
                          " is incompatible with supported version " +
                          std::to_string(kCheckpointVersion));
  std::string stored_checksum = j.at("checksum").get<std::string>();
  json body = j;
  body.erase("checksum");
  if (fnv1a_hex(body.dump()) != stored_checksum)
    throw ValidationError("checkpoint checksum mismatch in '" + path.string() + "'");

  ModelCheckpoint ckpt;
  ckpt.format_version = version;
  ckpt.config = config_from_json(j.at("config"));

  std::vector<std::string> subjects;
  for (const auto& [id, _] : j.at("embeddings").items()) subjects.push_back(id);

  ModelConfig mc;
  mc.variant = ckpt.config.variant;
  mc.hidden_dim = ckpt.config.hidden_dim;
  mc.embedding_dim = ckpt.config.embedding_dim;
  mc.tasks = model_tasks(ckpt.config);
  Rng dummy(0);
  ckpt.model = BehaviorModel::init(mc, subjects, dummy);

  const json& nets = j.at("nets");
  for (auto& [task, stages] : ckpt.model.nets()) {
    const json& jstages = nets.at(task_str(task));
    for (int k = 0; k < 4; ++k) {
      auto& layers = stages[k].graph.layers();
      const json& jlayers = jstages.at(k);
      if (jlayers.size() != layers.size())
        throw ValidationError("checkpoint stage layer count mismatch");
      for (std::size_t l = 0; l < layers.size(); ++l) layer_from_json(jlayers.at(l), layers[l]);
    }
  }
  for (auto& [id, e] : ckpt.model.mutable_embeddings()) {
    auto v = j.at("embeddings").at(id).get<std::vector<double>>();
    if (v.size() != e.size()) throw ValidationError("checkpoint embedding dim mismatch");
    e = std::move(v);
  }
  for (const auto& entry : j.at("log"))
    ckpt.log.push_back({entry.at("epoch").get<int>(), entry.at("train_nll").get<double>(),
                        entry.at("stopping_nll").get<double>()});
  return ckpt;
}

SampleComplexityResult sample_complexity(const std::vector<TrialRecord>& dataset,
                                         const TrainConfig& train_config,
                                         const SampleComplexityConfig& config,
                                         Rng master) {
  if (config.pool_sizes.empty()) throw std::invalid_argument("no pool sizes given");
  for (std::size_t i = 0; i < config.pool_sizes.size(); ++i) {
    if (config.pool_sizes[i] < config.n_test_subjects)
      throw std::invalid_argument("pool size smaller than the test cohort");
    if (i > 0 && config.pool_sizes[i] <= config.pool_sizes[i - 1])
      throw std::invalid_argument("pool sizes must be strictly ascending");
  }

  std::vector<TrialRecord> task_records = filter_tasks(dataset, model_tasks(train_config));
  DatasetSplit full = split(task_records, SplitSpec{}, master.substream("split"));

  std::map<std::string, std::vector<TrialRecord>> train_by_subject, stop_by_subject,
      val_by_subject;
  for (const auto& r : full.train) train_by_subject[r.subject_id].push_back(r);
  for (const auto& r : full.stopping) stop_by_subject[r.subject_id].push_back(r);
  for (const auto& r : full.validation) val_by_subject[r.subject_id].push_back(r);

  std::vector<std::string> all_subjects;
  for (const auto& [id, _] : train_by_subject) all_subjects.push_back(id);
  if (static_cast<int>(all_subjects.size()) < config.pool_sizes.back())
    throw std::invalid_argument("dataset has fewer subjects than the largest pool");

  std::vector<std::string> shuffled = all_subjects;
  Rng test_rng = master.substream("test-subjects");
  test_rng.shuffle(shuffled);
  std::vector<std::string> test_subjects(shuffled.begin(),
                                         shuffled.begin() + config.n_test_subjects);
  std::sort(test_subjects.begin(), test_subjects.end());
  std::set<std::string> test_set(test_subjects.begin(), test_subjects.end());
  std::vector<std::string> others;
  for (const auto& id : all_subjects)
    if (!test_set.count(id)) others.push_back(id);

  struct JobResult {
    int pool_size = 0;
    int repeat = 0;
    std::optional<double> r_moves, r_accuracy, r_score;
  };
  int n_pools = static_cast<int>(config.pool_sizes.size());
  int n_jobs = n_pools * config.n_repeats;
  std::vector<JobResult> results(n_jobs);

  auto run_job = [&](int job) {
    int repeat = job / n_pools;
    int pool_idx = job % n_pools;
    int pool_size = config.pool_sizes[pool_idx];
    Rng job_rng = master.substream("job").substream(static_cast<std::uint64_t>(job));

    std::vector<std::string> extras = others;
    Rng pick = job_rng.substream("extras");
    pick.shuffle(extras);
    extras.resize(pool_size - config.n_test_subjects);

    std::vector<std::string> pool = test_subjects;
    pool.insert(pool.end(), extras.begin(), extras.end());
    DatasetSplit job_data;
    for (const auto& id : pool) {
      auto t = train_by_subject.find(id);
      if (t != train_by_subject.end())
        job_data.train.insert(job_data.train.end(), t->second.begin(), t->second.end());
      auto s = stop_by_subject.find(id);
      if (s != stop_by_subject.end())
        job_data.stopping.insert(job_data.stopping.end(), s->second.begin(), s->second.end());
    }

    TrainConfig tc = train_config;
    tc.seed = job_rng.substream("train").next_u64();
    ModelCheckpoint ckpt = train(job_data, tc);

    std::vector<double> model_moves, model_acc, model_score;
    std::vector<double> human_moves, human_acc, human_score;
    for (const auto& id : test_subjects) {
      auto v = val_by_subject.find(id);
      if (v == val_by_subject.end() || v->second.empty()) continue;
      RolloutMetrics agg;
      Rng roll = job_rng.substream("rollout").substream(id);
      double h_moves = 0, h_acc = 0, h_score = 0;
      for (const auto& r : v->second) {
        RolloutMetrics m =
            ckpt.model.rollout(id, r.config, roll, config.rollouts_per_trial);
        agg.mean_n_moves += m.mean_n_moves;
        agg.accuracy += m.accuracy;
        agg.mean_score += m.mean_score;
        h_moves += r.n_moves;
        h_acc += r.correct ? 1.0 : 0.0;
        h_score += r.score;
      }
      double inv = 1.0 / static_cast<double>(v->second.size());
      model_moves.push_back(agg.mean_n_moves * inv);
      model_acc.push_back(agg.accuracy * inv);
      model_score.push_back(agg.mean_score * inv);
      human_moves.push_back(h_moves * inv);
      human_acc.push_back(h_acc * inv);
      human_score.push_back(h_score * inv);
    }

    JobResult res;
    res.pool_size = pool_size;
    res.repeat = repeat;
    auto corr = [](const std::vector<double>& a,
                   const std::vector<double>& b) -> std::optional<double> {
      try {
        return pearson(a, b).pearson_r;
      } catch (const std::invalid_argument&) {
        return std::nullopt;  // degenerate (constant) series
      }
    };
    res.r_moves = corr(model_moves, human_moves);
    res.r_accuracy = corr(model_acc, human_acc);
    res.r_score = corr(model_score, human_score);
    results[job] = res;
  };

  int n_workers = config.n_workers > 0
                      ? config.n_workers
                      : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::max(1, std::min(n_workers, n_jobs));
  std::atomic<int> next_job{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(n_workers);
  for (int w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w]() {
      try {
        for (int job = next_job.fetch_add(1); job < n_jobs; job = next_job.fetch_add(1))
          run_job(job);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  SampleComplexityResult out;
  out.detail.name = "sample_complexity_detail";
  out.detail.columns = {"pool_size", "repeat", "r_n_moves", "r_accuracy", "r_score"};
  auto opt_cell = [](const std::optional<double>& v) -> Cell {
    if (v) return *v;
    return std::monostate{};
  };
  for (int pool_idx = 0; pool_idx < n_pools; ++pool_idx)
    for (int repeat = 0; repeat < config.n_repeats; ++repeat) {
      const JobResult& r = results[repeat * n_pools + pool_idx];
      out.detail.rows.push_back({static_cast<double>(r.pool_size),
                                 static_cast<double>(r.repeat), opt_cell(r.r_moves),
                                 opt_cell(r.r_accuracy), opt_cell(r.r_score)});
    }

  out.summary.name = "sample_complexity_summary";
  out.summary.columns = {"pool_size", "n",       "mean_r_n_moves", "sem_r_n_moves",
                         "mean_r_accuracy", "sem_r_accuracy", "mean_r_score", "sem_r_score"};
  for (int pool_idx = 0; pool_idx < n_pools; ++pool_idx) {
    std::vector<double> rm, ra, rs;
    for (int repeat = 0; repeat < config.n_repeats; ++repeat) {
      const JobResult& r = results[repeat * n_pools + pool_idx];
      if (r.r_moves) rm.push_back(*r.r_moves);
      if (r.r_accuracy) ra.push_back(*r.r_accuracy);
      if (r.r_score) rs.push_back(*r.r_score);
    }
    auto stats = [](const std::vector<double>& v) -> std::pair<Cell, Cell> {
      if (v.empty()) return {std::monostate{}, std::monostate{}};
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= v.size();
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      double sem = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) / std::sqrt(v.size()) : 0.0;
      return {mean, sem};
    };
    auto [m1, s1] = stats(rm);
    auto [m2, s2] = stats(ra);
    auto [m3, s3] = stats(rs);
    out.summary.rows.push_back({static_cast<double>(config.pool_sizes[pool_idx]),
                                static_cast<double>(rm.size()), m1, s1, m2, s2, m3, s3});
  }
  return out;
}

}  // namespace infoseek
