#include "emvsim/runner.h"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "emvsim/report.h"
#include "emvsim/trace_io.h"

namespace emvsim {

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << content;
  if (!f) throw ConfigError("cannot write " + path);
}

std::string render(const std::vector<ReportRow>& rows, const std::string& format) {
  return format == "json" ? render_json(rows) : render_markdown(rows);
}

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

int cmd_run(const std::vector<std::string>& ids, bool all, uint64_t seed,
            const std::vector<std::string>& flaw_items, const std::string& trace_path,
            const std::string& report_path, const std::string& format, std::ostream& out) {
  const auto defs = select_scenarios(ids, all);
  const ScenarioOptions options{seed, parse_overrides(flaw_items)};
  const auto results = run_scenarios(defs, options);

  bool clean = true;
  std::vector<ReportRow> rows;
  std::string traces;
  for (const auto& r : results) {
    rows.push_back(row_from_result(r));
    if (!trace_path.empty()) traces += to_jsonl(r.trace);
    const auto labels = r.report.violated_labels();
    out << r.id << ": " << (r.diff.empty() ? "match" : "DIFF")
        << " succeeded=" << (r.succeeded ? "yes" : "no")
        << " violated=" << (labels.empty() ? "-" : join(labels, " ")) << "\n";
    for (const auto& d : r.diff) out << "  " << d << "\n";
    clean = clean && r.diff.empty();
  }
  if (!trace_path.empty()) write_file(trace_path, traces);
  if (!report_path.empty()) write_file(report_path, render(rows, format));
  return clean ? exit_code::kOk : exit_code::kDiff;
}

void cmd_list(std::ostream& out) {
  for (const auto& s : scenarios()) {
    std::vector<std::string> req(s.required.begin(), s.required.end());
    out << s.id << "\t" << attack_class_name(s.cls) << "\t"
        << (req.empty() ? "-" : join(req, ",")) << "\t" << s.title << "\n";
  }
}

int cmd_report(const std::vector<std::string>& files, const std::string& out_path,
               const std::string& format, std::ostream& out) {
  std::vector<ReportRow> rows;
  for (const auto& path : files) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read " + path);
    for (const auto& t : split_traces(read_jsonl(f))) rows.push_back(row_from_trace(t));
  }
  const std::string text = render(rows, format);
  if (out_path.empty()) {
    out << text;
  } else {
    write_file(out_path, text);
  }
  return exit_code::kOk;
}

}  // namespace

std::vector<const ScenarioDef*> select_scenarios(const std::vector<std::string>& ids, bool all) {
  std::set<std::string_view> wanted;
  for (const auto& id : ids) {
    if (!find_scenario(id)) throw ConfigError("unknown scenario: " + id);
    wanted.insert(id);
  }
  std::vector<const ScenarioDef*> out;
  for (const auto& s : scenarios()) {
    if (all || wanted.count(s.id)) out.push_back(&s);
  }
  if (out.empty()) throw ConfigError("no scenario selected");
  return out;
}

KnobSettings parse_overrides(const std::vector<std::string>& items) {
  KnobSettings out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("expected name=on|off, got '" + item + "'");
    const std::string name = item.substr(0, eq);
    if (!is_knob(name)) throw ConfigError("unknown flaw toggle: " + name);
    out[name] = parse_switch(std::string_view(item).substr(eq + 1));
  }
  return out;
}

std::vector<ScenarioResult> run_scenarios(const std::vector<const ScenarioDef*>& defs,
                                          const ScenarioOptions& options) {
  std::vector<ScenarioResult> out;
  out.reserve(defs.size());
  for (const ScenarioDef* d : defs) out.push_back(run_scenario(*d, options));
  return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"EMV contactless attack simulator", "emvsim"};
  app.require_subcommand(1);

  std::vector<std::string> ids;
  bool all = false;
  uint64_t seed = 0;
  std::vector<std::string> flaw_items;
  std::string trace_path;
  std::string report_path;
  std::string format = "md";
  auto* run = app.add_subcommand("run", "run attack scenarios and compare with expectations");
  run->add_option("ids", ids, "scenario ids");
  run->add_flag("--all", all, "run every scenario");
  run->add_option("--seed", seed, "64-bit seed");
  run->add_option("--flaw", flaw_items, "knob override name=on|off");
  run->add_option("--trace", trace_path, "write JSON Lines traces here");
  run->add_option("--report", report_path, "write the attack matrix here");
  run->add_option("--format", format, "report format")->check(CLI::IsMember({"json", "md"}));

  auto* list = app.add_subcommand("list", "list the scenario catalog");

  std::vector<std::string> files;
  std::string out_path;
  std::string report_format = "md";
  auto* report = app.add_subcommand("report", "render the attack matrix from trace files");
  report->add_option("traces", files, "JSON Lines trace files");
  report->add_option("--out", out_path, "output path; stdout if omitted");
  report->add_option("--format", report_format, "report format")
      ->check(CLI::IsMember({"json", "md"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kConfig;
  }

  try {
    if (run->parsed()) {
      return cmd_run(ids, all, seed, flaw_items, trace_path, report_path, format, out);
    }
    if (list->parsed()) {
      cmd_list(out);
      return exit_code::kOk;
    }
    return cmd_report(files, out_path, report_format, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const CodecError& e) {
    err << "error: " << e.what() << "\n";
  }
  return exit_code::kConfig;
}

}  // namespace emvsim
