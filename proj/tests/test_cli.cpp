#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cli/commands.hpp"
#include "condvine/copula.hpp"
#include "condvine/csv.hpp"
#include "condvine/stats.hpp"
#include "condvine/vine.hpp"
#include "doctest.h"

using namespace condvine;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("condvine_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string p(const fs::path& f) { return f.string(); }

void write_pairs(const fs::path& file, const std::vector<UnitPair>& pairs) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& u : pairs) rows.push_back({format_double(u.u1), format_double(u.u2)});
  write_text_file(file, to_csv({"x", "y"}, rows));
}

// Three columns: (x, y) dependent, z depends on x.
void write_three(const fs::path& file, std::size_t n) {
  const auto a = sample_pair(Family::Gaussian, 0.6, n, 3);
  const auto b = sample_pair(Family::ClaytonI, 0.4, n, 4);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = hinv(Family::ClaytonI, Conditioning::SecondGivenFirst, b[i].u2, a[i].u1, 0.4);
    rows.push_back({format_double(a[i].u1), format_double(a[i].u2), format_double(z)});
  }
  write_text_file(file, to_csv({"x", "y", "z"}, rows));
}

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  CHECK(run({"fit"}).code == cli::kUsageError);
  CHECK(run({"--help"}).code == cli::kSuccess);
  CHECK(run({"fit", "--help"}).code == cli::kSuccess);
  CHECK(run({"fit", "--data", "a.csv", "--out", "m.json", "--stopping", "bic"}).code == cli::kUsageError);
}

TEST_CASE("fit: simulate-then-fit recovers a Gaussian pair") {
  const auto dir = scratch("fit2");
  write_pairs(dir / "u.csv", sample_pair(Family::Gaussian, 0.5, 1000, 11));
  const Run r = run({"fit", "--data", p(dir / "u.csv"), "--out", p(dir / "m.json"), "--threads", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const ConditionalVineModel m = model_from_json(read_text_file(dir / "m.json"));
  CHECK(m.pair_models[0][0].family == Family::Gaussian);
  CHECK(m.covariate_names == std::vector<std::string>{"intercept"});
  CHECK(fs::exists(dir / "m.json.report.csv"));
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "m.json.manifest.json"));
  CHECK(manifest["command"] == "fit");
  CHECK(manifest["outputs"].size() == 2);
  CHECK(manifest["inputs"][0]["sha256"].get<std::string>().size() == 64);
  CHECK(r.err.find("tree 1") != std::string::npos);
}

TEST_CASE("fit: automatic structure and family restriction") {
  const auto dir = scratch("fit3");
  write_three(dir / "u.csv", 400);
  Run r = run({"fit", "--data", p(dir / "u.csv"), "--structure", "auto", "--out", p(dir / "m.json"), "--m-stop", "100"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "m.json.manifest.json"));
  const VineStructure s = structure_from_json(manifest["selected_structure"].dump());
  CHECK_FALSE(validate_structure(s).has_value());
  CHECK(s.d == 3);
  CHECK(s == model_from_json(read_text_file(dir / "m.json")).structure);

  r = run({"fit", "--data", p(dir / "u.csv"), "--families", "Gaussian", "--out", p(dir / "g.json"), "--m-stop",
           "100", "--truncate", "1"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const ConditionalVineModel g = model_from_json(read_text_file(dir / "g.json"));
  CHECK(g.pair_models[0][0].family == Family::Gaussian);
  CHECK(g.pair_models[0][1].family == Family::Gaussian);
  CHECK(g.pair_models[1][0].family == Family::Independence);

  // An explicit structure file, also checked by the validate command.
  write_text_file(dir / "s.json", structure_to_json(s));
  r = run({"fit", "--data", p(dir / "u.csv"), "--structure", p(dir / "s.json"), "--out", p(dir / "e.json"),
           "--m-stop", "100", "--report", p(dir / "e.csv"), "--manifest", p(dir / "e.manifest.json")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(read_csv(dir / "e.csv").rows.size() == 3);
  CHECK(run({"validate", "--structure", p(dir / "s.json")}).code == 0);
  CHECK(run({"validate", "--model", p(dir / "e.json")}).code == 0);
}

TEST_CASE("fit: malformed inputs exit with code 2 and a location") {
  const auto dir = scratch("fitbad");
  write_text_file(dir / "bad.csv", "x,y\n0.1,0.2\n0.3,oops\n");
  Run r = run({"fit", "--data", p(dir / "bad.csv"), "--out", p(dir / "m.json")});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("bad.csv:3:2") != std::string::npos);

  write_text_file(dir / "range.csv", "x,y\n0.1,0.2\n\n1.0,0.5\n");
  r = run({"fit", "--data", p(dir / "range.csv"), "--out", p(dir / "m.json")});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("range.csv:4:1") != std::string::npos);

  write_text_file(dir / "ragged.csv", "x,y\n0.1\n");
  r = run({"fit", "--data", p(dir / "ragged.csv"), "--out", p(dir / "m.json")});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("ragged.csv:2") != std::string::npos);

  write_pairs(dir / "u.csv", sample_pair(Family::Gaussian, 0.5, 50, 1));
  write_text_file(dir / "z.csv", "z1\n0.5\n0.25\n");
  r = run({"fit", "--data", p(dir / "u.csv"), "--covariates", p(dir / "z.csv"), "--out", p(dir / "m.json")});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("u.csv:4") != std::string::npos);

  write_text_file(dir / "cycle.json",
                  R"({"dimension": 3, "trees": [[{"a":0,"b":1,"conditioning":[]},{"a":0,"b":1,"conditioning":[]}],)"
                  R"([{"a":0,"b":2,"conditioning":[1]}]]})");
  r = run({"fit", "--data", p(dir / "u.csv"), "--structure", p(dir / "cycle.json"), "--out", p(dir / "m.json")});
  CHECK(r.code == cli::kUsageError);
  CHECK(run({"validate", "--structure", p(dir / "cycle.json")}).code == cli::kUsageError);

  r = run({"fit", "--data", p(dir / "u.csv"), "--families", "Frank", "--out", p(dir / "m.json")});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("Frank") != std::string::npos);
  CHECK(run({"fit", "--data", p(dir / "missing.csv"), "--out", p(dir / "m.json")}).code == cli::kUsageError);
  CHECK_FALSE(fs::exists(dir / "m.json"));
}

TEST_CASE("sample: determinism, independence and covariate checks") {
  const auto dir = scratch("sample");
  const VineStructure s = dvine_structure(std::vector<std::size_t>{0, 1, 2});
  const ConditionalVineModel indep =
      make_vine_model(s, {{Family::Independence, Family::Independence}, {Family::Independence}},
                      {{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)}, {Eigen::VectorXd::Zero(1)}},
                      {"intercept"});
  write_text_file(dir / "indep.json", to_json(indep));
  Run r = run({"sample", "--model", p(dir / "indep.json"), "--m", "10000", "--seed", "5", "--out", p(dir / "a.csv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const NumericTable t = read_numeric_csv(dir / "a.csv");
  REQUIRE(t.values.rows() == 10000);
  for (Eigen::Index v = 1; v <= 3; ++v) {
    const Eigen::VectorXd col = t.values.col(v);
    CHECK(ks_uniform({col.data(), static_cast<std::size_t>(col.size())}) < 0.02);
  }
  r = run({"sample", "--model", p(dir / "indep.json"), "--m", "10000", "--seed", "5", "--out", p(dir / "b.csv")});
  CHECK(read_text_file(dir / "a.csv") == read_text_file(dir / "b.csv"));

  // Covariate model: names are matched by header, intercept supplied if absent.
  const ConditionalVineModel cov = make_vine_model(
      s, {{Family::Gaussian, Family::ClaytonI}, {Family::GumbelII}},
      {{Eigen::Vector2d(0.3, 0.2), Eigen::Vector2d(0.1, -0.2)}, {Eigen::Vector2d(0.2, 0.0)}}, {"intercept", "temp"});
  write_text_file(dir / "cov.json", to_json(cov));
  write_text_file(dir / "z.csv", "other,temp\n9,0.5\n9,-1\n");
  r = run({"sample", "--model", p(dir / "cov.json"), "--covariates", p(dir / "z.csv"), "--n-per-row", "3", "--out",
           p(dir / "c.csv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const NumericTable c = read_numeric_csv(dir / "c.csv");
  CHECK(c.values.rows() == 6);
  CHECK(c.values(5, 0) == 1.0);
  write_text_file(dir / "bad.csv", "humidity\n0.5\n");
  r = run({"sample", "--model", p(dir / "cov.json"), "--covariates", p(dir / "bad.csv"), "--out", p(dir / "d.csv")});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("temp") != std::string::npos);
  CHECK(run({"sample", "--model", p(dir / "cov.json"), "--m", "5", "--out", p(dir / "d.csv")}).code ==
        cli::kUsageError);
  write_text_file(dir / "broken.json", "{\"schema_version\": 1");
  CHECK(run({"sample", "--model", p(dir / "broken.json"), "--m", "5", "--out", p(dir / "d.csv")}).code ==
        cli::kUsageError);
}

TEST_CASE("score: perfect forecasts, identical methods and the hand example") {
  const auto dir = scratch("score");
  std::string f = "time,method,member,v\n", o = "time,v\n";
  for (int t = 0; t < 12; ++t) {
    o += std::to_string(t) + ",1\n";
    for (const char* m : {"A", "B"}) {
      f += std::to_string(t) + "," + m + ",0,0\n";
      f += std::to_string(t) + "," + m + ",1,2\n";
    }
    f += std::to_string(t) + ",P,0,1\n";
  }
  write_text_file(dir / "f.csv", f);
  write_text_file(dir / "o.csv", o);
  const Run r = run({"score", "--forecasts", p(dir / "f.csv"), "--observations", p(dir / "o.csv"), "--out",
                     p(dir / "s.csv")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const CsvTable s = read_csv(dir / "s.csv");
  CHECK(s.header == std::vector<std::string>{"time", "es_A", "es_B", "es_P", "vs_A", "vs_B", "vs_P"});
  REQUIRE(s.rows.size() == 12);
  for (const auto& row : s.rows) {
    CHECK(row[1] == "0.5");
    CHECK(row[3] == "0");
    CHECK(row[6] == "0");
  }
  const CsvTable dm = read_csv(dir / "s.csv.dm.csv");
  REQUIRE(dm.rows.size() == 6);
  CHECK(dm.rows[0][1] == "A");
  CHECK(dm.rows[0][2] == "B");
  CHECK(dm.rows[0][5] == "1");
  CHECK(dm.rows[0][7] == "1");
  CHECK(r.err.find("zero variance") != std::string::npos);

  write_text_file(dir / "o2.csv", "time,v\n0,1\n1,1\n");
  Run bad = run({"score", "--forecasts", p(dir / "f.csv"), "--observations", p(dir / "o2.csv"), "--out",
                 p(dir / "x.csv")});
  CHECK(bad.code == cli::kUsageError);
  CHECK(bad.err.find("f.csv:") != std::string::npos);
  write_text_file(dir / "f2.csv", "time,method,member,v\n0,A,0,1\n");
  bad = run({"score", "--forecasts", p(dir / "f2.csv"), "--observations", p(dir / "o2.csv"), "--out",
             p(dir / "x.csv")});
  CHECK(bad.code == cli::kUsageError);
  CHECK(bad.err.find("o2.csv:3") != std::string::npos);
}

TEST_CASE("simulate: smoke run and config errors") {
  const auto dir = scratch("simulate");
  write_text_file(dir / "s.json",
                  R"({"kind": "bicop", "N": 200, "p": 8, "n_reps": 1, "seed": 3, "control": {"m_stop": 60}})");
  Run r = run({"simulate", "--scenario", p(dir / "s.json"), "--out-dir", p(dir / "out")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  for (const char* f : {"coefficients.csv", "metrics.csv", "summary.csv", "failures.csv", "config.json", "manifest.json"})
    CHECK(fs::exists(dir / "out" / f));
  r = run({"simulate", "--scenario", p(dir / "s.json"), "--out-dir", p(dir / "out2"), "--threads", "2"});
  REQUIRE(r.code == 0);
  for (const char* f : {"coefficients.csv", "metrics.csv", "summary.csv", "config.json"})
    CHECK(read_text_file(dir / "out" / f) == read_text_file(dir / "out2" / f));

  write_text_file(dir / "bad.json", R"({"kind": "bicop", "rho": -0.5})");
  r = run({"simulate", "--scenario", p(dir / "bad.json"), "--out-dir", p(dir / "out3")});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("'rho'") != std::string::npos);
}
