#include "infoseek/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace infoseek::io {

using nlohmann::json;

std::string format_real(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
  }
  // Shortest representation that round-trips exactly.
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// All rows of a CSV file, header first, with 1-based line numbers.
struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;
};

CsvFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  CsvFile file;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      file.header = split_line(line, ',');
    } else if (!line.empty()) {
      file.rows.emplace_back(line_no, split_line(line, ','));
    }
  }
  if (file.header.empty()) throw ValidationError("'" + path.string() + "': missing header");
  return file;
}

int parse_int_field(const std::string& s, const std::string& column) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ValidationError("column '" + column + "': '" + s + "' is not an integer");
  return v;
}

double parse_real_field(const std::string& s, const std::string& column) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty())
    throw ValidationError("column '" + column + "': '" + s + "' is not a number");
  return v;
}

const std::vector<std::string> kTrialColumns = {
    "subject_id", "task", "trial_id", "a1",      "a2",
    "b1",         "b2",   "reveal_order", "actions", "decision_time_ms"};

TrialRecord parse_trial_row(const std::map<std::string, std::string>& cells) {
  auto get = [&](const std::string& col) -> const std::string& {
    auto it = cells.find(col);
    if (it == cells.end()) throw ValidationError("missing column '" + col + "'");
    return it->second;
  };

  TrialConfig config;
  config.task = parse_task(get("task"));
  const char* value_cols[4] = {"a1", "a2", "b1", "b2"};
  for (int i = 0; i < 4; ++i) {
    int v = parse_int_field(get(value_cols[i]), value_cols[i]);
    if (v < 1 || v > 10)
      throw ValidationError("column '" + std::string(value_cols[i]) + "': value " +
                            std::to_string(v) + " outside [1, 10]");
    config.layout.values[i] = v;
  }
  auto order_parts = split_line(get("reveal_order"), ';');
  if (order_parts.size() != 4)
    throw ValidationError("column 'reveal_order': expected 4 positions, got " +
                          std::to_string(order_parts.size()));
  for (int i = 0; i < 4; ++i) config.reveal_order[i] = CardPosition::parse(order_parts[i]);
  config.validate();

  std::vector<Action> actions;
  for (const auto& code : split_line(get("actions"), ';')) actions.push_back(Action::parse(code));

  std::optional<double> dt;
  const std::string& dt_str = get("decision_time_ms");
  if (!dt_str.empty()) dt = parse_real_field(dt_str, "decision_time_ms");

  return make_record(get("subject_id"), get("trial_id"), config, std::move(actions), dt);
}

std::map<std::string, std::string> zip_row(const std::vector<std::string>& header,
                                           const std::vector<std::string>& cells) {
  if (cells.size() != header.size())
    throw ValidationError("expected " + std::to_string(header.size()) + " fields, got " +
                          std::to_string(cells.size()));
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < header.size(); ++i) out[header[i]] = cells[i];
  return out;
}

void check_header(const std::vector<std::string>& header,
                  const std::vector<std::string>& expected, const std::string& what) {
  if (header != expected)
    throw ValidationError(what + " header mismatch: got '" + join(header, ',') + "'");
}

}  // namespace

std::vector<TrialRecord> read_trials(const std::filesystem::path& path, bool strict,
                                     ReadReport* report) {
  CsvFile file = read_csv(path);
  check_header(file.header, kTrialColumns, "trials");
  std::vector<TrialRecord> out;
  ReadReport local;
  for (const auto& [line_no, cells] : file.rows) {
    ++local.n_rows;
    try {
      out.push_back(parse_trial_row(zip_row(file.header, cells)));
    } catch (const std::exception& e) {
      std::string diag = "line " + std::to_string(line_no) + ": " + e.what();
      if (strict) throw ValidationError("'" + path.string() + "' " + diag);
      ++local.n_skipped;
      local.diagnostics.push_back(diag);
    }
  }
  if (report) *report = std::move(local);
  return out;
}

void write_trials(const std::vector<TrialRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << join(kTrialColumns, ',') << "\n";
  for (const auto& r : records) {
    std::vector<std::string> order, actions;
    for (const auto& p : r.config.reveal_order) order.push_back(p.str());
    for (const auto& a : r.actions) actions.push_back(a.str());
    out << r.subject_id << ',' << task_str(r.config.task) << ',' << r.trial_id;
    for (int v : r.config.layout.values) out << ',' << v;
    out << ',' << join(order, ';') << ',' << join(actions, ';') << ',';
    if (r.decision_time_ms) out << format_real(*r.decision_time_ms);
    out << "\n";
  }
}

namespace {

const std::vector<std::string> kSubjectColumns = {
    "subject_id",    "age_bucket",           "gender",          "education",
    "approach_param", "avoid_param",         "generator_tau",   "generator_w_conf",
    "generator_w_cost", "generator_b",       "generator_delta_frame",
    "generator_alpha", "generator_rho"};

SubjectProfile parse_subject_row(const std::map<std::string, std::string>& cells) {
  auto text = [&](const std::string& col) -> std::optional<std::string> {
    const std::string& s = cells.at(col);
    if (s.empty()) return std::nullopt;
    return s;
  };
  auto num = [&](const std::string& col) -> std::optional<double> {
    const std::string& s = cells.at(col);
    if (s.empty()) return std::nullopt;
    return parse_real_field(s, col);
  };

  SubjectProfile p;
  p.subject_id = cells.at("subject_id");
  if (p.subject_id.empty()) throw ValidationError("column 'subject_id': empty");
  p.age_bucket = text("age_bucket");
  p.gender = text("gender");
  p.education = text("education");
  p.approach_param = num("approach_param");
  p.avoid_param = num("avoid_param");

  const char* gen_cols[] = {"generator_tau",   "generator_w_conf", "generator_w_cost",
                            "generator_b",     "generator_delta_frame", "generator_alpha",
                            "generator_rho"};
  int n_present = 0;
  for (const char* col : gen_cols)
    if (!cells.at(col).empty()) ++n_present;
  if (n_present == 7) {
    AgentParams g;
    g.tau = *num("generator_tau");
    g.w_conf = *num("generator_w_conf");
    g.w_cost = *num("generator_w_cost");
    double b = *num("generator_b");
    g.b = {b, b, b};
    g.delta_frame = *num("generator_delta_frame");
    g.alpha = *num("generator_alpha");
    g.rho = *num("generator_rho");
    p.generator_params = g;
  } else if (n_present != 0) {
    throw ValidationError("generator_* columns must be all present or all blank");
  }
  return p;
}

}  // namespace

std::vector<SubjectProfile> read_subjects(const std::filesystem::path& path, bool strict,
                                          ReadReport* report) {
  CsvFile file = read_csv(path);
  check_header(file.header, kSubjectColumns, "subjects");
  std::vector<SubjectProfile> out;
  std::set<std::string> seen;
  ReadReport local;
  for (const auto& [line_no, cells] : file.rows) {
    ++local.n_rows;
    try {
      SubjectProfile p = parse_subject_row(zip_row(file.header, cells));
      if (!seen.insert(p.subject_id).second)
        throw ValidationError("duplicate subject_id '" + p.subject_id + "'");
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      std::string diag = "line " + std::to_string(line_no) + ": " + e.what();
      if (strict) throw ValidationError("'" + path.string() + "' " + diag);
      ++local.n_skipped;
      local.diagnostics.push_back(diag);
    }
  }
  if (report) *report = std::move(local);
  return out;
}

void write_subjects(const std::vector<SubjectProfile>& subjects,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << join(kSubjectColumns, ',') << "\n";
  auto opt_text = [](const std::optional<std::string>& s) { return s ? *s : ""; };
  auto opt_num = [](const std::optional<double>& v) { return v ? format_real(*v) : ""; };
  for (const auto& p : subjects) {
    out << p.subject_id << ',' << opt_text(p.age_bucket) << ',' << opt_text(p.gender) << ','
        << opt_text(p.education) << ',' << opt_num(p.approach_param) << ','
        << opt_num(p.avoid_param);
    if (p.generator_params) {
      const AgentParams& g = *p.generator_params;
      for (double v : {g.tau, g.w_conf, g.w_cost, g.b[0], g.delta_frame, g.alpha, g.rho})
        out << ',' << format_real(v);
    } else {
      out << ",,,,,,,";
    }
    out << "\n";
  }
}

ImportReport import_external(const std::filesystem::path& source, const ColumnMapping& mapping,
                             const std::filesystem::path& dest) {
  CsvFile file = read_csv(source);
  std::map<std::string, std::size_t> source_index;
  for (std::size_t i = 0; i < file.header.size(); ++i) source_index[file.header[i]] = i;

  // Canonical column -> source column index; -1 means always blank (only
  // allowed for decision_time_ms).
  std::map<std::string, long> resolved;
  for (const auto& canonical : kTrialColumns) {
    std::string source_name = canonical;
    auto it = mapping.columns.find(canonical);
    if (it != mapping.columns.end()) source_name = it->second;
    if (source_name.empty() || !source_index.count(source_name)) {
      if (canonical == "decision_time_ms") {
        resolved[canonical] = -1;
        continue;
      }
      throw ValidationError("required column '" + canonical + "' (source '" + source_name +
                            "') not found in '" + source.string() + "'");
    }
    resolved[canonical] = static_cast<long>(source_index[source_name]);
  }

  ImportReport report;
  std::vector<TrialRecord> records;
  for (const auto& [line_no, cells] : file.rows) {
    try {
      if (cells.size() != file.header.size())
        throw ValidationError("expected " + std::to_string(file.header.size()) +
                              " fields, got " + std::to_string(cells.size()));
      std::map<std::string, std::string> row;
      for (const auto& [canonical, idx] : resolved)
        row[canonical] = idx < 0 ? std::string() : cells[static_cast<std::size_t>(idx)];
      records.push_back(parse_trial_row(row));
      ++report.n_imported;
    } catch (const std::exception& e) {
      ++report.n_dropped;
      report.diagnostics.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  write_trials(records, dest);
  return report;
}

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key))
      throw ValidationError("unknown config key '" + where + key + "'");
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

NormalSpec normal_from_json(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"mean", "sd"}, where);
  NormalSpec s;
  read_key(j, "mean", s.mean);
  read_key(j, "sd", s.sd);
  return s;
}

json normal_to_json(const NormalSpec& s) { return {{"mean", s.mean}, {"sd", s.sd}}; }

std::vector<Task> tasks_from_json(const json& j) {
  std::vector<Task> out;
  for (const auto& t : j) out.push_back(parse_task(t.get<std::string>()));
  if (out.empty()) throw ValidationError("config: 'tasks' must not be empty");
  return out;
}

}  // namespace

RunConfig read_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed config '" + path.string() + "': " + e.what());
  }

  RunConfig c;
  reject_unknown_keys(j, {"seed", "out_dir", "train", "generator", "sample_complexity"}, "");
  read_key(j, "seed", c.seed);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();

  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown_keys(t,
                        {"lr", "batch_size", "max_epochs", "patience", "min_delta", "variant",
                         "embedding_dim", "hidden_dim", "task"},
                        "train.");
    read_key(t, "lr", c.train.lr);
    read_key(t, "batch_size", c.train.batch_size);
    read_key(t, "max_epochs", c.train.max_epochs);
    read_key(t, "patience", c.train.patience);
    read_key(t, "min_delta", c.train.min_delta);
    if (t.contains("variant")) c.train.variant = parse_variant(t.at("variant").get<std::string>());
    read_key(t, "embedding_dim", c.train.embedding_dim);
    read_key(t, "hidden_dim", c.train.hidden_dim);
    if (t.contains("task")) c.train.task = parse_task(t.at("task").get<std::string>());
  }

  if (j.contains("generator")) {
    const json& g = j.at("generator");
    reject_unknown_keys(g, {"n_subjects", "n_trials_per_task", "tasks", "distributions"},
                        "generator.");
    read_key(g, "n_subjects", c.generator.n_subjects);
    read_key(g, "n_trials_per_task", c.generator.n_trials_per_task);
    if (g.contains("tasks")) c.generator.tasks = tasks_from_json(g.at("tasks"));
    if (g.contains("distributions")) {
      const json& d = g.at("distributions");
      reject_unknown_keys(
          d, {"tau_log", "w_conf", "w_cost", "b", "delta_frame", "alpha", "rho"},
          "generator.distributions.");
      ParamDistributions& pd = c.generator.distributions;
      auto spec = [&](const char* key, NormalSpec& out) {
        if (d.contains(key))
          out = normal_from_json(d.at(key), "generator.distributions." + std::string(key) + ".");
      };
      spec("tau_log", pd.tau_log);
      spec("w_conf", pd.w_conf);
      spec("w_cost", pd.w_cost);
      spec("b", pd.b);
      spec("delta_frame", pd.delta_frame);
      spec("alpha", pd.alpha);
      spec("rho", pd.rho);
    }
  }

  if (j.contains("sample_complexity")) {
    const json& s = j.at("sample_complexity");
    reject_unknown_keys(
        s, {"n_test_subjects", "pool_sizes", "n_repeats", "rollouts_per_trial", "n_workers"},
        "sample_complexity.");
    read_key(s, "n_test_subjects", c.sample_complexity.n_test_subjects);
    read_key(s, "pool_sizes", c.sample_complexity.pool_sizes);
    read_key(s, "n_repeats", c.sample_complexity.n_repeats);
    read_key(s, "rollouts_per_trial", c.sample_complexity.rollouts_per_trial);
    read_key(s, "n_workers", c.sample_complexity.n_workers);
  }

  c.train.seed = c.seed;
  return c;
}

namespace {

json run_config_to_json(const RunConfig& c) {
  json tasks = json::array();
  for (Task t : c.generator.tasks) tasks.push_back(task_str(t));
  const ParamDistributions& pd = c.generator.distributions;
  return {
      {"seed", c.seed},
      {"out_dir", c.out_dir.string()},
      {"train",
       {{"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"min_delta", c.train.min_delta},
        {"variant", variant_str(c.train.variant)},
        {"embedding_dim", c.train.embedding_dim},
        {"hidden_dim", c.train.hidden_dim},
        {"task", task_str(c.train.task)}}},
      {"generator",
       {{"n_subjects", c.generator.n_subjects},
        {"n_trials_per_task", c.generator.n_trials_per_task},
        {"tasks", std::move(tasks)},
        {"distributions",
         {{"tau_log", normal_to_json(pd.tau_log)},
          {"w_conf", normal_to_json(pd.w_conf)},
          {"w_cost", normal_to_json(pd.w_cost)},
          {"b", normal_to_json(pd.b)},
          {"delta_frame", normal_to_json(pd.delta_frame)},
          {"alpha", normal_to_json(pd.alpha)},
          {"rho", normal_to_json(pd.rho)}}}}},
      {"sample_complexity",
       {{"n_test_subjects", c.sample_complexity.n_test_subjects},
        {"pool_sizes", c.sample_complexity.pool_sizes},
        {"n_repeats", c.sample_complexity.n_repeats},
        {"rollouts_per_trial", c.sample_complexity.rollouts_per_trial},
        {"n_workers", c.sample_complexity.n_workers}}}};
}

}  // namespace

void write_run_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << run_config_to_json(config).dump(2) << "\n";
}

void stamp_output_dir(const RunConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json j = run_config_to_json(config);
  j["tool_version"] = kToolVersion;
  std::ofstream out(dir / "effective_config.json");
  if (!out) throw std::runtime_error("cannot write config echo in '" + dir.string() + "'");
  out << j.dump(2) << "\n";
}

std::string table_to_csv(const AnalysisTable& table) {
  std::string out = join(table.columns, ',');
  out += "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw std::logic_error("table '" + table.name + "': ragged row");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (std::holds_alternative<double>(row[i]))
        out += format_real(std::get<double>(row[i]));
      else if (std::holds_alternative<std::string>(row[i]))
        out += std::get<std::string>(row[i]);
    }
    out += "\n";
  }
  return out;
}

void write_table_csv(const AnalysisTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << table_to_csv(table);
}

}  // namespace infoseek::io
