#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "infoseek/agents.hpp"
#include "infoseek/io.hpp"

using namespace infoseek;

namespace {

std::filesystem::path tmp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("infoseek_io_" + name);
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<TrialRecord> sample_dataset() {
  Rng rng(404);
  auto subjects = sample_population(rng, 3, ParamDistributions{});
  std::vector<TrialRecord> records;
  for (const auto& s : subjects)
    for (Task t : {Task::MaxProd, Task::MinProd}) {
      Rng sub = rng.substream(s.subject_id).substream(task_str(t));
      auto trials = simulate_subject(s, t, 4, sub);
      records.insert(records.end(), trials.begin(), trials.end());
    }
  return records;
}

const char* kHeader =
    "subject_id,task,trial_id,a1,a2,b1,b2,reveal_order,actions,decision_time_ms\n";

}  // namespace

TEST_CASE("trials round-trip losslessly") {
  auto records = sample_dataset();
  records[0].decision_time_ms = 1234.5;
  auto path = tmp_path("trials.csv");
  io::write_trials(records, path);
  auto back = io::read_trials(path);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].subject_id == records[i].subject_id);
    CHECK(back[i].trial_id == records[i].trial_id);
    CHECK(back[i].config.layout.values == records[i].config.layout.values);
    CHECK(back[i].config.task == records[i].config.task);
    CHECK(back[i].actions == records[i].actions);
    CHECK(back[i].n_moves == records[i].n_moves);
    CHECK(back[i].correct == records[i].correct);
    CHECK(back[i].score == records[i].score);
    CHECK(back[i].decision_time_ms == records[i].decision_time_ms);
  }
  // Re-writing the parsed data reproduces the file byte for byte.
  auto path2 = tmp_path("trials2.csv");
  io::write_trials(back, path2);
  CHECK(slurp(path) == slurp(path2));
  CHECK(slurp(path).find('\r') == std::string::npos);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("out-of-range card value is reported with line and column") {
  auto path = tmp_path("bad_value.csv");
  write_text(path, std::string(kHeader) +
                       "s1,max,t0,11,2,3,4,A1;A2;B1;B2,GA,\n");
  CHECK_THROWS_WITH_AS(io::read_trials(path), doctest::Contains("a1"), ValidationError);
  CHECK_THROWS_WITH_AS(io::read_trials(path), doctest::Contains("line 2"), ValidationError);

  io::ReadReport report;
  auto rows = io::read_trials(path, /*strict=*/false, &report);
  CHECK(rows.empty());
  CHECK(report.n_rows == 1);
  CHECK(report.n_skipped == 1);
  REQUIRE(report.diagnostics.size() == 1);
  CHECK(report.diagnostics[0].find("a1") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("derived fields are recomputed, never trusted") {
  auto path = tmp_path("derived.csv");
  write_text(path, std::string(kHeader) +
                       "s1,max,t0,2,3,4,5,A1;B1;A2;B2,S;S;S;GA,\n");
  auto rows = io::read_trials(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n_moves == 4);
  // A product 6 < B product 20: GA is wrong under MaxProd.
  CHECK(rows[0].correct == false);
  CHECK(rows[0].score == -60 - 10 - 15 - 20);
  std::filesystem::remove(path);
}

TEST_CASE("subjects round-trip including generator truth") {
  Rng rng(7);
  auto subjects = sample_population(rng, 4, ParamDistributions{});
  subjects[1].generator_params.reset();  // a subject without synthetic truth
  auto path = tmp_path("subjects.csv");
  io::write_subjects(subjects, path);
  auto back = io::read_subjects(path);
  REQUIRE(back.size() == 4);
  CHECK(back[0].subject_id == subjects[0].subject_id);
  CHECK(back[0].age_bucket == subjects[0].age_bucket);
  CHECK(back[0].approach_param == subjects[0].approach_param);
  REQUIRE(back[0].generator_params.has_value());
  CHECK(back[0].generator_params->tau == subjects[0].generator_params->tau);
  CHECK(back[0].generator_params->b == subjects[0].generator_params->b);
  CHECK(!back[1].generator_params.has_value());
  std::filesystem::remove(path);
}

TEST_CASE("duplicate subject ids are rejected") {
  auto path = tmp_path("dup_subjects.csv");
  write_text(path,
             "subject_id,age_bucket,gender,education,approach_param,avoid_param,"
             "generator_tau,generator_w_conf,generator_w_cost,generator_b,"
             "generator_delta_frame,generator_alpha,generator_rho\n"
             "s1,,,,,,,,,,,,\n"
             "s1,,,,,,,,,,,,\n");
  CHECK_THROWS_WITH_AS(io::read_subjects(path), doctest::Contains("duplicate"),
                       ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("import with the identity mapping is byte-equivalent") {
  auto records = sample_dataset();
  auto src = tmp_path("import_src.csv");
  auto dst = tmp_path("import_dst.csv");
  io::write_trials(records, src);
  io::ImportReport report = io::import_external(src, io::ColumnMapping{}, dst);
  CHECK(report.n_imported == static_cast<int>(records.size()));
  CHECK(report.n_dropped == 0);
  CHECK(slurp(src) == slurp(dst));
  std::filesystem::remove(src);
  std::filesystem::remove(dst);
}

TEST_CASE("import maps renamed columns and reports dropped rows") {
  auto src = tmp_path("ext.csv");
  auto dst = tmp_path("ext_out.csv");
  write_text(src,
             "participant,cond,idx,c1,c2,c3,c4,order,moves,rt\n"
             "p1,max,0,2,3,4,5,A1;B1;A2;B2,S;GA,88\n"
             "p2,min,1,9,9,2,2,B2;A1;B1;A2,GB,\n"
             "p3,max,2,2,3,4,5,A1;B1;A2;B2,S;S,\n");  // no final guess: dropped
  io::ColumnMapping mapping;
  mapping.columns = {{"subject_id", "participant"}, {"task", "cond"},
                     {"trial_id", "idx"},           {"a1", "c1"},
                     {"a2", "c2"},                  {"b1", "c3"},
                     {"b2", "c4"},                  {"reveal_order", "order"},
                     {"actions", "moves"},          {"decision_time_ms", "rt"}};
  io::ImportReport report = io::import_external(src, mapping, dst);
  CHECK(report.n_imported == 2);
  CHECK(report.n_dropped == 1);
  REQUIRE(report.diagnostics.size() == 1);
  CHECK(report.diagnostics[0].find("line 4") != std::string::npos);

  auto back = io::read_trials(dst);
  REQUIRE(back.size() == 2);
  CHECK(back[0].subject_id == "p1");
  CHECK(back[0].decision_time_ms == 88.0);
  CHECK(back[1].config.task == Task::MinProd);

  // Losing a required column is a hard error.
  mapping.columns["actions"] = "nonexistent";
  CHECK_THROWS_WITH_AS(io::import_external(src, mapping, dst),
                       doctest::Contains("actions"), ValidationError);
  std::filesystem::remove(src);
  std::filesystem::remove(dst);
}

TEST_CASE("run config round-trips and rejects unknown keys") {
  io::RunConfig config;
  config.seed = 99;
  config.train.lr = 0.001;
  config.generator.n_subjects = 42;
  config.generator.distributions.alpha = {1.5, 0.1};
  config.sample_complexity.pool_sizes = {10, 20};
  auto path = tmp_path("config.json");
  io::write_run_config(config, path);
  io::RunConfig back = io::read_run_config(path);
  CHECK(back.seed == 99);
  CHECK(back.train.lr == 0.001);
  CHECK(back.train.seed == 99);  // master seed flows into training
  CHECK(back.generator.n_subjects == 42);
  CHECK(back.generator.distributions.alpha.mean == 1.5);
  CHECK(back.sample_complexity.pool_sizes == std::vector<int>{10, 20});

  write_text(path, R"({"sede": 1})");
  CHECK_THROWS_WITH_AS(io::read_run_config(path), doctest::Contains("sede"),
                       ValidationError);
  write_text(path, R"({"train": {"lr": 0.1, "momentum": 0.9}})");
  CHECK_THROWS_WITH_AS(io::read_run_config(path), doctest::Contains("momentum"),
                       ValidationError);
  write_text(path, "{not json");
  CHECK_THROWS_AS(io::read_run_config(path), ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("format_real prints shortest exact decimals") {
  CHECK(io::format_real(3.0) == "3");
  CHECK(io::format_real(-17.0) == "-17");
  CHECK(io::format_real(0.5) == "0.5");
  for (double v : {0.1, 1.0 / 3.0, 2.0 / 7.0, 1e-12, 123456.789012345}) {
    CHECK(std::strtod(io::format_real(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("analysis tables serialize with stable formatting") {
  AnalysisTable t;
  t.name = "demo";
  t.columns = {"label", "value", "note"};
  t.rows = {{std::string("x"), 0.25, std::monostate{}},
            {std::string("y"), 2.0, std::string("ok")}};
  CHECK(io::table_to_csv(t) == "label,value,note\nx,0.25,\ny,2,ok\n");

  AnalysisTable ragged = t;
  ragged.rows.push_back({std::string("z")});
  CHECK_THROWS_AS(io::table_to_csv(ragged), std::logic_error);
}

TEST_CASE("output directories get the effective config stamp") {
  io::RunConfig config;
  config.seed = 5;
  auto dir = tmp_path("outdir");
  io::stamp_output_dir(config, dir);
  std::string echo = slurp(dir / "effective_config.json");
  CHECK(echo.find("\"tool_version\"") != std::string::npos);
  CHECK(echo.find("\"seed\": 5") != std::string::npos);
  std::filesystem::remove_all(dir);
}
