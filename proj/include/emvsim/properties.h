// Trace-level security properties P1-P6, attack-success assessment, and the
// comparison of a report against a scenario's expected row.

#ifndef EMVSIM_PROPERTIES_H_
#define EMVSIM_PROPERTIES_H_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emvsim/channel.h"
#include "emvsim/datamodel.h"

namespace emvsim {

enum class AttackClass : uint8_t {
  kNone,  // honest run
  kPinBypass,
  kReplay,
  kCloning,
  kDos,
  kSecrecy,
  kMerchantBag,
  kMitmAccept,
};
std::string_view attack_class_name(AttackClass c);
std::optional<AttackClass> attack_class_from(std::string_view s);

// Property keys in report order.
inline constexpr std::string_view kP1 = "P1";
inline constexpr std::string_view kP2 = "P2";
inline constexpr std::string_view kP3 = "P3";
inline constexpr std::string_view kP31 = "P3.1";
inline constexpr std::string_view kP32 = "P3.2";
inline constexpr std::string_view kP4 = "P4";
inline constexpr std::string_view kP5 = "P5";
inline constexpr std::string_view kP6 = "P6";
const std::vector<std::string_view>& property_keys();

// Pseudo-field of P1: a cryptogram produced in one run is accepted in
// another.
inline constexpr std::string_view kReplayField = "replay";

// Knowledge categories always treated as secret.
const std::set<std::string>& base_secrets();

enum class PropertyVerdict : uint8_t { kSatisfied, kViolated, kNotApplicable, kNotEvaluated };
std::string_view verdict_name(PropertyVerdict v);

struct PropertyResult {
  PropertyVerdict verdict = PropertyVerdict::kNotApplicable;
  std::vector<int> evidence;  // trace indices
  std::set<std::string> details;  // P1 fields, P5 categories
  bool violated() const { return verdict == PropertyVerdict::kViolated; }
};

struct PropertyReport {
  std::map<std::string, PropertyResult, std::less<>> results;

  const PropertyResult& at(std::string_view key) const;
  // "P1(AID,CTQ)", "P3", ... in report order.
  std::vector<std::string> violated_labels() const;
  bool any_violation() const;
};

// What a trace's scenario_meta marker declares.
struct ScenarioMeta {
  std::string id;
  std::string title;
  AttackClass cls = AttackClass::kNone;
  std::vector<std::string> agreement;  // tag names plus, optionally, "replay"
  std::set<std::string> secrets;
  uint64_t cvm_limit = 5000;
  std::map<std::string, std::string> knobs;
  std::vector<std::string> flaws;
  std::set<Capability> capabilities;

  std::map<std::string, std::string> to_attrs() const;
  static ScenarioMeta from_attrs(const std::map<std::string, std::string>& attrs);
};

// Reads the first scenario_meta marker; throws ConfigError if there is none.
ScenarioMeta meta_of(const Trace& trace);

struct Acceptance {
  int run = 0;
  int index = 0;  // the deciding marker
  bool offline = false;
  bool terminal = true;  // false: issuer approval with no terminal in the run
  std::optional<Amount> amount;
};

std::vector<Acceptance> acceptances(const Trace& trace);

PropertyReport evaluate(const Trace& trace, const ScenarioMeta& meta);
PropertyReport evaluate(const Trace& trace);

bool attack_succeeded(const Trace& trace, const ScenarioMeta& meta, const PropertyReport& report);

struct Expectation {
  std::set<std::string> properties;  // keys among property_keys()
  std::set<std::string> p1_fields;
  std::set<std::string> p5_categories;
  std::set<Capability> capabilities;
  std::set<std::string> flaws;
};

// One line per mismatch; empty when the observed row matches.
std::vector<std::string> compare_expected(const PropertyReport& report,
                                          const std::set<Capability>& used,
                                          const std::vector<std::string>& flaws, bool succeeded,
                                          const Expectation& expected);

// Capabilities the adversary used, from capability_use markers.
std::set<Capability> capabilities_used(const Trace& trace);

}  // namespace emvsim

#endif  // EMVSIM_PROPERTIES_H_
