// Attack matrix: one row per scenario trace with the violated properties,
// capabilities used, flaws exploited and the success verdict.

#ifndef EMVSIM_REPORT_H_
#define EMVSIM_REPORT_H_

#include <string>
#include <vector>

#include "emvsim/channel.h"
#include "emvsim/scenarios.h"

namespace emvsim {

struct ReportRow {
  std::string id;
  std::string title;
  std::string cls;
  std::vector<std::string> violated;  // "P1(AID,CTQ)", "P3", ...
  std::vector<std::string> capabilities;
  std::vector<std::string> flaws;
  bool succeeded = false;

  bool operator==(const ReportRow&) const = default;
};

// Re-evaluates a trace from its scenario_meta marker.
ReportRow row_from_trace(const Trace& trace);
ReportRow row_from_result(const ScenarioResult& result);

// Splits concatenated scenario traces at each scenario_meta marker. Entries
// before the first marker are dropped.
std::vector<Trace> split_traces(const std::vector<TraceEntry>& entries);

std::string render_json(const std::vector<ReportRow>& rows);
std::string render_markdown(const std::vector<ReportRow>& rows);

}  // namespace emvsim

#endif  // EMVSIM_REPORT_H_
