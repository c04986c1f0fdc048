// The attack catalog, its building blocks (skimming, CVC3 harvesting, PIN
// campaigns), and the honest fixture matrix.

#ifndef EMVSIM_SCENARIOS_H_
#define EMVSIM_SCENARIOS_H_

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emvsim/card.h"
#include "emvsim/channel.h"
#include "emvsim/environment.h"
#include "emvsim/properties.h"
#include "emvsim/toggles.h"

namespace emvsim {

struct ScenarioContext;

struct ScenarioDef {
  std::string_view id;
  std::string_view title;
  AttackClass cls;
  std::string_view card;
  std::string_view terminal;
  std::string_view issuer;
  Amount amount;
  // Knobs the attack depends on; each is set to its flawed value.
  std::vector<std::string_view> required;
  // Further knob values the scenario runs with.
  KnobSettings settings;
  std::vector<std::string> agreement;
  std::set<std::string> secrets;
  Expectation expected;
  void (*run)(ScenarioContext& ctx);
};

const std::vector<ScenarioDef>& scenarios();
const ScenarioDef* find_scenario(std::string_view id);

struct ScenarioOptions {
  uint64_t seed = 0;
  KnobSettings overrides;  // applied after the required knobs
};

struct ScenarioResult {
  std::string id;
  Trace trace;
  ScenarioMeta meta;
  PropertyReport report;
  std::set<Capability> used;
  bool succeeded = false;
  std::vector<std::string> diff;  // empty for honest runs
};

// Builds the environment, runs the scenario and evaluates the trace. Throws
// ConfigError for a missing fixture or unknown knob.
ScenarioResult run_scenario(const ScenarioDef& def, const ScenarioOptions& options);

// Everything a scenario body can reach.
struct ScenarioContext {
  const ScenarioDef& def;
  EnvSpec env;
  World& world;
  Adversary& adversary;
  Card& card;
  Terminal& terminal;
};

// ---------------------------------------------------------------------------
// Building blocks.

// A rogue reader's session with a card: SELECT, GPO with the given terminal
// inputs, and every AFL record.
struct SkimResult {
  bool ok = false;
  Message gpo_response;
  HarvestedCard card;
  Aid aid;
};
SkimResult skim(CardLink& link, const Amount& amount, const Ttq& ttq, const Un& un_t);

// Queries COMPUTE CRYPTOGRAPHIC CHECKSUM for UN values 0..count-1 after a
// mag-stripe-mode setup. Returns an empty table if the card has no mag-stripe
// profile or refuses.
struct HarvestResult {
  Cvc3Table table;
  HarvestedCard card;
  bool available = false;
};
HarvestResult harvest_cvc3(CardLink& link, uint8_t n_digits, uint32_t count);

enum class PinStrategy : uint8_t { kFindPin, kExhaust };

struct PinCampaign {
  PinStrategy strategy = PinStrategy::kFindPin;
  int stop_at_remaining = 1;
  int max_encounters = 10000;
};

struct PinCampaignResult {
  bool available = true;  // false when VERIFY is not offered
  std::optional<std::string> pin;
  int guesses = 0;
  int encounters = 0;
  bool blocked = false;
};

// Ordered sweep from 0000. Between encounters the cardholder uses the card
// with the right PIN, which restores the try counter.
PinCampaignResult pin_guess_campaign(Adversary& adversary, Card& card, const PinCampaign& plan);

// ---------------------------------------------------------------------------
// Honest matrix.

struct GenuineCase {
  std::string card;
  std::string terminal;
  std::string issuer;
  Amount amount;
  std::string label() const;
};

bool valid_pairing(const CardProfile& card, const TerminalConfig& terminal);
std::vector<GenuineCase> genuine_matrix();
ScenarioResult run_genuine(const GenuineCase& c, uint64_t seed);

// Fields checked for agreement in honest runs.
const std::vector<std::string>& full_agreement();

}  // namespace emvsim

#endif  // EMVSIM_SCENARIOS_H_
