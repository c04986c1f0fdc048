#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "emvsim/report.h"
#include "emvsim/runner.h"
#include "emvsim/trace_io.h"

namespace emvsim {
namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("emvsim_runner_test_" + name);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST_CASE("selection keeps catalog order and rejects unknown ids") {
  auto picked = select_scenarios({"magic_byte", "ctq_bypass", "magic_byte"}, false);
  REQUIRE(picked.size() == 2);
  CHECK(picked[0]->id == "ctq_bypass");
  CHECK(picked[1]->id == "magic_byte");
  CHECK(select_scenarios({}, true).size() == scenarios().size());
  CHECK_THROWS_AS(select_scenarios({"nope"}, false), ConfigError);
  CHECK_THROWS_AS(select_scenarios({}, false), ConfigError);
}

TEST_CASE("override parsing") {
  KnobSettings s = parse_overrides({"fdda=on", "cda=off"});
  CHECK(s.at("fdda"));
  CHECK_FALSE(s.at("cda"));
  CHECK_THROWS_AS(parse_overrides({"fdda"}), ConfigError);
  CHECK_THROWS_AS(parse_overrides({"fdda=maybe"}), ConfigError);
  CHECK_THROWS_AS(parse_overrides({"no_such=on"}), ConfigError);
}

TEST_CASE("exit codes") {
  CHECK(cli({"run", "--all", "--seed", "7"}).code == exit_code::kOk);
  CliRun fixed = cli({"run", "ctq_bypass", "--flaw", "fdda=on"});
  CHECK(fixed.code == exit_code::kDiff);
  CHECK(fixed.out.find("ctq_bypass: DIFF") != std::string::npos);
  CHECK(cli({"run", "no_such_attack"}).code == exit_code::kConfig);
  CHECK(cli({"run", "ctq_bypass", "--flaw", "bogus=on"}).code == exit_code::kConfig);
  CHECK(cli({"run", "--bogus-option"}).code == exit_code::kConfig);
  CHECK(cli({"run"}).code == exit_code::kConfig);
  CHECK(cli({"--help"}).code == exit_code::kOk);
}

TEST_CASE("list prints one row per scenario") {
  CliRun r = cli({"list"});
  CHECK(r.code == 0);
  size_t lines = 0;
  std::istringstream in(r.out);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++lines;
  }
  CHECK(lines == scenarios().size());
}

TEST_CASE("report of an empty trace is a header-only matrix") {
  const auto trace = temp_path("empty.jsonl");
  std::ofstream(trace).close();
  CliRun r = cli({"report", trace.string(), "--format", "md"});
  CHECK(r.code == 0);
  CHECK(r.out == render_markdown({}));
  std::filesystem::remove(trace);
}

TEST_CASE("a run, its trace and its report are reproducible byte for byte") {
  const auto t1 = temp_path("t1.jsonl"), t2 = temp_path("t2.jsonl");
  const auto r1 = temp_path("r1.json"), r2 = temp_path("r2.json");
  CliRun a = cli({"run", "--all", "--seed", "3", "--trace", t1.string(), "--report", r1.string(),
                "--format", "json"});
  CliRun b = cli({"run", "--all", "--seed", "3", "--trace", t2.string(), "--report", r2.string(),
                "--format", "json"});
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(slurp(t1) == slurp(t2));
  CHECK(slurp(r1) == slurp(r2));
  CHECK_FALSE(slurp(t1).empty());

  // Re-reading the trace reproduces the report computed during the run.
  const auto r3 = temp_path("r3.json");
  CHECK(cli({"report", t1.string(), "--out", r3.string(), "--format", "json"}).code == 0);
  CHECK(slurp(r3) == slurp(r1));
  for (const auto& p : {t1, t2, r1, r2, r3}) std::filesystem::remove(p);
}

TEST_CASE("concatenated traces split back into one trace per scenario") {
  std::vector<ScenarioResult> results =
      run_scenarios(select_scenarios({"ctq_bypass", "pin_guess_dos"}, false), {5, {}});
  std::vector<TraceEntry> all;
  for (const auto& r : results) {
    std::istringstream in(to_jsonl(r.trace));
    for (auto& e : read_jsonl(in)) all.push_back(std::move(e));
  }
  std::vector<Trace> split = split_traces(all);
  REQUIRE(split.size() == 2);
  for (size_t i = 0; i < split.size(); ++i) {
    CHECK(split[i].entries() == results[i].trace.entries());
    CHECK(row_from_trace(split[i]) == row_from_result(results[i]));
  }
}

TEST_CASE("markdown rendering") {
  ReportRow row{"x", "X", "pin_bypass", {"P1(CTQ)", "P3"}, {"A1"}, {}, true};
  const std::string md = render_markdown({row});
  CHECK(md.find("| x | P1(CTQ), P3 | A1 | - | yes |") != std::string::npos);
}

}  // namespace
}  // namespace emvsim
