// Configuration knobs and the flaw catalog they realize. A knob is a named
// boolean setting of one component; its flawed value is the permissive
// setting an attack depends on.

#ifndef EMVSIM_TOGGLES_H_
#define EMVSIM_TOGGLES_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emvsim/environment.h"

namespace emvsim {

enum class Component : uint8_t { kCard, kTerminal, kIssuer };
std::string_view component_name(Component c);

struct Knob {
  std::string_view name;
  Component component;
  bool flawed;            // value that realizes the flaw
  std::string_view flaw;  // catalog flaw id; empty for hardening-only knobs
  std::string_view description;
  void (*apply)(EnvSpec& env, bool value);
  bool (*read)(const EnvSpec& env);
};

const std::vector<Knob>& knobs();
// Throws ConfigError for an unknown name.
const Knob& knob(std::string_view name);
bool is_knob(std::string_view name);

struct FlawInfo {
  std::string_view id;
  bool structural;  // present in every modeled configuration
  std::string_view description;
};

const std::vector<FlawInfo>& flaws();
const FlawInfo* find_flaw(std::string_view id);

using KnobSettings = std::map<std::string, bool>;

void apply_knobs(EnvSpec& env, const KnobSettings& settings);

// Parses "on"/"off" (also true/false, 1/0). Throws ConfigError otherwise.
bool parse_switch(std::string_view value);

}  // namespace emvsim

#endif  // EMVSIM_TOGGLES_H_
