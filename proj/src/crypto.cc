#include "emvsim/crypto.h"

#include <sodium.h>

#include <algorithm>
#include <mutex>

namespace emvsim {

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  });
}

Bytes hmac(ByteView key, ByteView msg) {
  ensure_sodium();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, msg.data(), msg.size());
  Bytes out(crypto_auth_hmacsha256_BYTES);
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

Bytes with_label(std::string_view label, ByteView body) {
  Bytes m(label.begin(), label.end());
  m.push_back(0);
  m.insert(m.end(), body.begin(), body.end());
  return m;
}

bool equal_ct(ByteView a, ByteView b) {
  return a.size() == b.size() && sodium_memcmp(a.data(), b.data(), a.size()) == 0;
}

void check_coverage(const std::vector<Tag>& coverage, const DataElementMap& inputs) {
  std::vector<Tag> want = coverage;
  std::sort(want.begin(), want.end());
  want.erase(std::unique(want.begin(), want.end()), want.end());
  if (inputs.tags() != want) throw CoverageError("MAC inputs do not match the coverage set");
}

bool all_digits(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

MasterKey MasterKey::generate(Rng& rng) { return {rng.bytes(32)}; }
Cvc3Key Cvc3Key::generate(Rng& rng) { return {rng.bytes(32)}; }
PinKey PinKey::generate(Rng& rng) { return {rng.bytes(crypto_aead_chacha20poly1305_ietf_KEYBYTES)}; }

SigningKey SigningKey::generate(Rng& rng) {
  ensure_sodium();
  SigningKey k;
  k.seed = rng.bytes(crypto_sign_SEEDBYTES);
  k.secret.resize(crypto_sign_SECRETKEYBYTES);
  k.public_key.resize(crypto_sign_PUBLICKEYBYTES);
  crypto_sign_seed_keypair(k.public_key.data(), k.secret.data(), k.seed.data());
  return k;
}

SessionKey kdf(const MasterKey& mk, Atc atc) {
  return {hmac(mk.mk, with_label("kdf", atc.encode()))};
}

Bytes compute_ac(const SessionKey& s, const std::vector<Tag>& coverage,
                 const DataElementMap& inputs) {
  check_coverage(coverage, inputs);
  Bytes mac = hmac(s.s, with_label("ac", encode_canonical(inputs)));
  mac.resize(kAcLength);
  return mac;
}

bool verify_ac(const SessionKey& s, const std::vector<Tag>& coverage,
               const DataElementMap& inputs, ByteView ac) {
  if (ac.size() != kAcLength) return false;
  try {
    return equal_ct(compute_ac(s, coverage, inputs), ac);
  } catch (const CoverageError&) {
    return false;
  }
}

std::string_view oda_method_name(OdaMethod m) {
  switch (m) {
    case OdaMethod::kSda: return "sda";
    case OdaMethod::kDda: return "dda";
    case OdaMethod::kCda: return "cda";
    case OdaMethod::kFdda: return "fdda";
  }
  return "?";
}

std::optional<OdaMethod> oda_method_from_name(std::string_view s) {
  for (int i = 1; i <= 4; ++i) {
    auto m = static_cast<OdaMethod>(i);
    if (oda_method_name(m) == s) return m;
  }
  return std::nullopt;
}

uint8_t sdad_header(OdaMethod m) {
  switch (m) {
    case OdaMethod::kSda: return 0x03;
    case OdaMethod::kDda: return 0x05;
    case OdaMethod::kCda: return 0x95;
    case OdaMethod::kFdda: return 0x6A;
  }
  return 0;
}

std::vector<Tag> sdad_coverage(OdaMethod m) {
  switch (m) {
    case OdaMethod::kCda:
      return {Tag::kUnC, Tag::kUnT, Tag::kAc, Tag::kAtc, Tag::kIad, Tag::kCid, Tag::kAip};
    case OdaMethod::kFdda:
      return {Tag::kUnC, Tag::kUnT, Tag::kAtc, Tag::kCtq, Tag::kAip};
    case OdaMethod::kDda:
      return {Tag::kUnC, Tag::kUnT};
    case OdaMethod::kSda:
      return sda_coverage();
  }
  return {};
}

std::vector<Tag> sda_coverage() { return {Tag::kPan, Tag::kExpiry, Tag::kAip}; }

Bytes sign_bytes(const SigningKey& sk, ByteView msg) {
  ensure_sodium();
  Bytes sig(crypto_sign_BYTES);
  crypto_sign_detached(sig.data(), nullptr, msg.data(), msg.size(), sk.secret.data());
  return sig;
}

bool verify_bytes(ByteView pk, ByteView msg, ByteView sig) {
  ensure_sodium();
  if (pk.size() != crypto_sign_PUBLICKEYBYTES || sig.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(sig.data(), msg.data(), msg.size(), pk.data()) == 0;
}

Bytes sign_sdad(const SigningKey& sk, OdaMethod m, const DataElementMap& payload) {
  check_coverage(sdad_coverage(m), payload);
  uint8_t header = sdad_header(m);
  Bytes msg{header};
  Bytes body = encode_canonical(payload);
  msg.insert(msg.end(), body.begin(), body.end());
  Bytes out{header};
  Bytes sig = sign_bytes(sk, msg);
  out.insert(out.end(), sig.begin(), sig.end());
  return out;
}

bool verify_sdad(ByteView pk, OdaMethod m, const DataElementMap& payload, ByteView sdad) {
  if (sdad.empty() || sdad[0] != sdad_header(m)) return false;
  try {
    check_coverage(sdad_coverage(m), payload);
  } catch (const CoverageError&) {
    return false;
  }
  Bytes msg{sdad[0]};
  Bytes body = encode_canonical(payload);
  msg.insert(msg.end(), body.begin(), body.end());
  return verify_bytes(pk, msg, sdad.subspan(1));
}

Bytes sign_ssad(const SigningKey& issuer_sk, const DataElementMap& static_data) {
  return sign_sdad(issuer_sk, OdaMethod::kSda, static_data);
}

bool verify_ssad(ByteView issuer_pk, const DataElementMap& static_data, ByteView ssad) {
  return verify_sdad(issuer_pk, OdaMethod::kSda, static_data, ssad);
}

const Bytes* CaKeyStore::lookup(uint8_t index) const {
  auto it = keys.find(index);
  return it == keys.end() ? nullptr : &it->second;
}

Certificate issue_certificate(const SigningKey& signer, std::string subject, ByteView subject_pk) {
  Certificate c;
  c.subject = std::move(subject);
  c.public_key.assign(subject_pk.begin(), subject_pk.end());
  c.signature = sign_bytes(signer, c.signed_part());
  return c;
}

std::string_view chain_status_name(ChainStatus s) {
  switch (s) {
    case ChainStatus::kOk: return "ok";
    case ChainStatus::kLookupFailure: return "lookup_failure";
    case ChainStatus::kBadSignature: return "bad_signature";
  }
  return "?";
}

ChainResult verify_chain(const CaKeyStore& store, const CertificateChain& chain) {
  ChainResult r;
  const Bytes* ca_pk = store.lookup(chain.ca_index);
  if (!ca_pk) {
    r.status = ChainStatus::kLookupFailure;
    return r;
  }
  if (!verify_bytes(*ca_pk, chain.issuer_cert.signed_part(), chain.issuer_cert.signature)) {
    r.status = ChainStatus::kBadSignature;
    return r;
  }
  r.issuer_pk = chain.issuer_cert.public_key;
  if (chain.card_cert) {
    if (!verify_bytes(r.issuer_pk, chain.card_cert->signed_part(), chain.card_cert->signature)) {
      r.status = ChainStatus::kBadSignature;
      r.issuer_pk.clear();
      return r;
    }
    r.card_pk = chain.card_cert->public_key;
  }
  r.status = ChainStatus::kOk;
  return r;
}

Bytes encrypt_pin(std::string_view pin, const PinKey& key, Rng& rng) {
  ensure_sodium();
  if (pin.size() != 4 || !all_digits(pin)) throw MalformedPin("PIN must be 4 decimal digits");
  Bytes nonce = rng.bytes(crypto_aead_chacha20poly1305_ietf_NPUBBYTES);
  Bytes out = nonce;
  out.resize(nonce.size() + pin.size() + crypto_aead_chacha20poly1305_ietf_ABYTES);
  unsigned long long clen = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(
      out.data() + nonce.size(), &clen, reinterpret_cast<const uint8_t*>(pin.data()),
      pin.size(), nullptr, 0, nullptr, nonce.data(), key.k.data());
  out.resize(nonce.size() + clen);
  return out;
}

bool verify_online_pin(ByteView blob, const PinKey& key, std::string_view stored_pin) {
  ensure_sodium();
  const size_t npub = crypto_aead_chacha20poly1305_ietf_NPUBBYTES;
  const size_t abytes = crypto_aead_chacha20poly1305_ietf_ABYTES;
  if (blob.size() < npub + abytes || key.k.size() != crypto_aead_chacha20poly1305_ietf_KEYBYTES) {
    return false;
  }
  Bytes plain(blob.size() - npub - abytes);
  unsigned long long plen = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(plain.data(), &plen, nullptr,
                                                blob.data() + npub, blob.size() - npub,
                                                nullptr, 0, blob.data(), key.k.data()) != 0) {
    return false;
  }
  plain.resize(plen);
  return equal_ct(plain, ByteView(reinterpret_cast<const uint8_t*>(stored_pin.data()),
                                  stored_pin.size()));
}

Bytes compute_cvc3(const Cvc3Key& k, Atc atc, const Un& un) {
  if (!un.digits) throw CodecError("CVC3 requires a digit-constrained UN");
  Bytes body = atc.encode();
  Bytes u = un.encode();
  body.insert(body.end(), u.begin(), u.end());
  Bytes mac = hmac(k.k, with_label("cvc3", body));
  mac.resize(kCvc3Length);
  return mac;
}

}  // namespace emvsim
