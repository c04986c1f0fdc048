#include "emvsim/report.h"

#include <sstream>

#include "json.hpp"

namespace emvsim {

namespace {

using json = nlohmann::json;

std::vector<std::string> cap_names(const std::set<Capability>& caps) {
  std::vector<std::string> out;
  for (Capability c : caps) out.push_back(capability_name(c));
  return out;
}

ReportRow make_row(const ScenarioMeta& meta, const PropertyReport& report,
                   const std::set<Capability>& used, bool succeeded) {
  ReportRow r;
  r.id = meta.id;
  r.title = meta.title;
  r.cls = std::string(attack_class_name(meta.cls));
  r.violated = report.violated_labels();
  r.capabilities = cap_names(used);
  r.flaws = meta.flaws;
  r.succeeded = succeeded;
  return r;
}

std::string join(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::string cell(const std::vector<std::string>& v) { return v.empty() ? "-" : join(v, ", "); }

}  // namespace

ReportRow row_from_trace(const Trace& trace) {
  const ScenarioMeta meta = meta_of(trace);
  const PropertyReport report = evaluate(trace, meta);
  return make_row(meta, report, capabilities_used(trace),
                  attack_succeeded(trace, meta, report));
}

ReportRow row_from_result(const ScenarioResult& result) {
  return make_row(result.meta, result.report, result.used, result.succeeded);
}

std::vector<Trace> split_traces(const std::vector<TraceEntry>& entries) {
  std::vector<std::vector<TraceEntry>> groups;
  for (const auto& e : entries) {
    const auto* m = std::get_if<Marker>(&e);
    if (m && m->kind == marker::kScenarioMeta) groups.emplace_back();
    if (!groups.empty()) groups.back().push_back(e);
  }
  std::vector<Trace> out;
  for (auto& g : groups) out.push_back(Trace::from_entries(std::move(g)));
  return out;
}

std::string render_json(const std::vector<ReportRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"attack", r.id},
                   {"title", r.title},
                   {"class", r.cls},
                   {"violated_properties", r.violated},
                   {"capabilities", r.capabilities},
                   {"flaws", r.flaws},
                   {"succeeded", r.succeeded}});
  }
  return json{{"rows", arr}}.dump(2) + "\n";
}

std::string render_markdown(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "| attack | violated properties | capabilities | flaws | succeeded |\n";
  out << "|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.id << " | " << cell(r.violated) << " | " << cell(r.capabilities) << " | "
        << cell(r.flaws) << " | " << (r.succeeded ? "yes" : "no") << " |\n";
  }
  return out.str();
}

}  // namespace emvsim
