// Seeded scenario execution and the command-line front end.

#ifndef EMVSIM_RUNNER_H_
#define EMVSIM_RUNNER_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "emvsim/scenarios.h"
#include "emvsim/toggles.h"

namespace emvsim {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kDiff = 1;
inline constexpr int kConfig = 2;
}  // namespace exit_code

// Catalog order is kept regardless of argument order; duplicates collapse.
// Throws ConfigError for an unknown id or an empty selection.
std::vector<const ScenarioDef*> select_scenarios(const std::vector<std::string>& ids, bool all);

// Parses "name=on|off" items. Throws ConfigError on a malformed item or an
// unknown knob.
KnobSettings parse_overrides(const std::vector<std::string>& items);

std::vector<ScenarioResult> run_scenarios(const std::vector<const ScenarioDef*>& defs,
                                          const ScenarioOptions& options);

// Subcommands: run, list, report. Returns an exit_code value.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace emvsim

#endif  // EMVSIM_RUNNER_H_
