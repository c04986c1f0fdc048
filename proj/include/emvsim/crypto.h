// Keys and primitives: session-key derivation, the application cryptogram,
// SDAD/SSAD signatures, the CA → issuer → card certificate chain, online PIN
// blobs and the mag-stripe CVC3.
//
// Backed by libsodium: HMAC-SHA256 for every MAC, Ed25519 for signatures,
// ChaCha20-Poly1305 (IETF) for PIN blobs.

#ifndef EMVSIM_CRYPTO_H_
#define EMVSIM_CRYPTO_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emvsim/datamodel.h"
#include "emvsim/rng.h"

namespace emvsim {

class CoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MasterKey {
  Bytes mk;  // 32 bytes
  static MasterKey generate(Rng& rng);
};

struct SessionKey {
  Bytes s;
};

struct Cvc3Key {
  Bytes k;
  static Cvc3Key generate(Rng& rng);
};

struct PinKey {
  Bytes k;
  static PinKey generate(Rng& rng);
};

struct SigningKey {
  Bytes seed;        // 32 bytes, Ed25519 seed
  Bytes secret;      // 64 bytes, libsodium expanded form
  Bytes public_key;  // 32 bytes
  static SigningKey generate(Rng& rng);
};

constexpr size_t kAcLength = 8;
constexpr size_t kCvc3Length = 8;

SessionKey kdf(const MasterKey& mk, Atc atc);

// The MAC covers encode_canonical(inputs); inputs must hold exactly the
// coverage tags.
Bytes compute_ac(const SessionKey& s, const std::vector<Tag>& coverage,
                 const DataElementMap& inputs);
bool verify_ac(const SessionKey& s, const std::vector<Tag>& coverage,
               const DataElementMap& inputs, ByteView ac);

enum class OdaMethod : uint8_t { kSda = 1, kDda = 2, kCda = 3, kFdda = 4 };
std::string_view oda_method_name(OdaMethod m);
std::optional<OdaMethod> oda_method_from_name(std::string_view s);

// One-byte SDAD header. Kernel 2 (DDA, CDA) and kernel 3 (fDDA) formats
// differ, so a signature produced under one is rejected under the other.
uint8_t sdad_header(OdaMethod m);

// Coverage sets. SDA is not listed here: it is an issuer signature over
// sda_coverage() and never covers the AC.
std::vector<Tag> sdad_coverage(OdaMethod m);
std::vector<Tag> sda_coverage();

Bytes sign_sdad(const SigningKey& sk, OdaMethod m, const DataElementMap& payload);
bool verify_sdad(ByteView pk, OdaMethod m, const DataElementMap& payload, ByteView sdad);

Bytes sign_ssad(const SigningKey& issuer_sk, const DataElementMap& static_data);
bool verify_ssad(ByteView issuer_pk, const DataElementMap& static_data, ByteView ssad);

Bytes sign_bytes(const SigningKey& sk, ByteView msg);
bool verify_bytes(ByteView pk, ByteView msg, ByteView sig);

struct CaKeyStore {
  std::map<uint8_t, Bytes> keys;
  const Bytes* lookup(uint8_t index) const;
};

struct CertificateChain {
  uint8_t ca_index = 0;
  Certificate issuer_cert;
  std::optional<Certificate> card_cert;
};

Certificate issue_certificate(const SigningKey& signer, std::string subject, ByteView subject_pk);

enum class ChainStatus { kOk, kLookupFailure, kBadSignature };
std::string_view chain_status_name(ChainStatus s);

struct ChainResult {
  ChainStatus status = ChainStatus::kBadSignature;
  Bytes issuer_pk;
  Bytes card_pk;  // empty when the chain has no card certificate
  bool ok() const { return status == ChainStatus::kOk; }
};

ChainResult verify_chain(const CaKeyStore& store, const CertificateChain& chain);

class MalformedPin : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Bytes encrypt_pin(std::string_view pin, const PinKey& key, Rng& rng);
bool verify_online_pin(ByteView blob, const PinKey& key, std::string_view stored_pin);

// un must be digit constrained.
Bytes compute_cvc3(const Cvc3Key& k, Atc atc, const Un& un);

}  // namespace emvsim

#endif  // EMVSIM_CRYPTO_H_
