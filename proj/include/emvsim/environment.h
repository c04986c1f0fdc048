// Key generation, card issuance, and the world that owns every agent of one
// scenario run.

#ifndef EMVSIM_ENVIRONMENT_H_
#define EMVSIM_ENVIRONMENT_H_

#include <memory>
#include <vector>

#include "emvsim/card.h"
#include "emvsim/channel.h"
#include "emvsim/crypto.h"
#include "emvsim/issuer.h"
#include "emvsim/rng.h"
#include "emvsim/terminal.h"

namespace emvsim {

// The configurable parts of one scenario before issuance. Knobs act here.
struct EnvSpec {
  CardProfile card;
  TerminalConfig terminal;
  IssuerPolicy issuer;
};

struct Pki {
  uint8_t ca_index = 1;
  SigningKey ca;
  SigningKey issuer;

  static Pki generate(Rng& rng);
  CaKeyStore store() const;
};

// AIP ODA and CVM bits follow the profile's capabilities.
void derive_aip(CardProfile& card);

// Generates the card's keys, certificate chain and SSAD, and returns what the
// issuer keeps. The card's TTQ coverage follows the issuer policy.
IssuerCardRecord issue_card(CardProfile& card, const IssuerPolicy& policy, const Pki& pki,
                            Rng& rng);

class World {
 public:
  World(IssuerPolicy policy, uint64_t seed);
  World(const World&) = delete;
  World& operator=(const World&) = delete;

  Rng& rng() { return rng_; }
  Trace& trace() { return trace_; }
  Issuer& issuer() { return *issuer_; }
  Acquirer& acquirer() { return *acquirer_; }
  const Pki& pki() const { return pki_; }
  const PinKey& pin_key() const { return pin_key_; }

  // Issues the card and registers it with the issuer.
  Card& add_card(CardProfile profile);
  // Installs CA keys and the PIN key and registers the merchant account.
  Terminal& add_terminal(TerminalConfig cfg);

 private:
  Rng rng_;
  Trace trace_;
  Pki pki_;
  PinKey pin_key_;
  std::unique_ptr<Issuer> issuer_;
  std::unique_ptr<Acquirer> acquirer_;
  std::vector<std::unique_ptr<Card>> cards_;
  std::vector<std::unique_ptr<Terminal>> terminals_;
};

}  // namespace emvsim

#endif  // EMVSIM_ENVIRONMENT_H_
