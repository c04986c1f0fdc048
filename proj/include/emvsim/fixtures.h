// Canonical card, terminal and issuer fixtures, loaded from the JSON files in
// the fixture directory. Unknown keys are rejected.

#ifndef EMVSIM_FIXTURES_H_
#define EMVSIM_FIXTURES_H_

#include <string>
#include <string_view>
#include <vector>

#include "emvsim/card.h"
#include "emvsim/issuer.h"
#include "emvsim/terminal.h"

namespace emvsim {

// EMVSIM_FIXTURE_DIR unless overridden by the environment variable of the
// same name.
std::string fixture_dir();

// Each throws ConfigError for an unknown id or a malformed file.
CardProfile load_card(std::string_view id);
TerminalConfig load_terminal(std::string_view id);
IssuerPolicy load_issuer(std::string_view id);

std::vector<std::string> card_ids();
std::vector<std::string> terminal_ids();
std::vector<std::string> issuer_ids();

// Parsers for a single fixture object in JSON text; used by tests and by
// loaders above.
CardProfile parse_card(std::string_view json_text);
TerminalConfig parse_terminal(std::string_view json_text);
IssuerPolicy parse_issuer(std::string_view json_text);

}  // namespace emvsim

#endif  // EMVSIM_FIXTURES_H_
