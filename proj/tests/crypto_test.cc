#include <sodium.h>

#include <algorithm>

#include "doctest.h"
#include "emvsim/card.h"
#include "emvsim/crypto.h"

namespace emvsim {
namespace {

Bytes hmac_oracle(const Bytes& key, const std::string& label, const Bytes& body) {
  Bytes msg(label.begin(), label.end());
  msg.push_back(0);
  msg.insert(msg.end(), body.begin(), body.end());
  Bytes out(crypto_auth_hmacsha256_BYTES);
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, msg.data(), msg.size());
  crypto_auth_hmacsha256_final(&st, out.data());
  return out;
}

DataElementMap sample_inputs(const std::vector<Tag>& coverage) {
  DataElementMap all;
  put_amount(all, {2000, "EUR"});
  all.set<Tag::kUnT>({0x01020304, std::nullopt});
  all.set<Tag::kAip>(Aip{false, false, true, false, false, true});
  all.set<Tag::kAtc>(Atc{7});
  all.set<Tag::kTvr>(Tvr{});
  all.set<Tag::kCvmResults>(CvmResults::none());
  all.set<Tag::kTtq>(Ttq{true, true, false, false, true});
  all.set<Tag::kCtq>(Ctq{});
  all.set<Tag::kAid>(kAidMastercard);
  all.set<Tag::kIad>(Iad{});
  all.set<Tag::kCid>(Cid{CidKind::kArqc});
  all.set<Tag::kUnC>({99, std::nullopt});
  all.set<Tag::kAc>({Bytes(8, 0x11)});
  all.set<Tag::kPan>(Pan{"5100001234560049"});
  all.set<Tag::kExpiry>(Expiry{28, 10});
  return all.project(coverage);
}

TEST_CASE("session key and AC follow the keyed-hash composition") {
  Rng rng(1);
  const MasterKey mk = MasterKey::generate(rng);
  const Atc atc{42};
  const SessionKey s = kdf(mk, atc);
  CHECK(s.s == hmac_oracle(mk.mk, "kdf", Bytes{0, 42}));

  const auto cov = ac_coverage(2, false, true);
  const DataElementMap in = sample_inputs(cov);
  Bytes want = hmac_oracle(s.s, "ac", encode_canonical(in));
  want.resize(kAcLength);
  CHECK(compute_ac(s, cov, in) == want);
  CHECK(verify_ac(s, cov, in, want));
}

TEST_CASE("AC rejects every single covered-field change") {
  Rng rng(2);
  const SessionKey s = kdf(MasterKey::generate(rng), Atc{1});
  for (int kernel : {2, 3}) {
    for (bool ttq : {false, true}) {
      for (bool aid : {false, true}) {
        const auto cov = ac_coverage(kernel, ttq, aid);
        const DataElementMap in = sample_inputs(cov);
        const Bytes ac = compute_ac(s, cov, in);
        for (Tag t : cov) {
          DataElementMap bad = in;
          Bytes v = *in.raw(t);
          // Pick a replacement that still decodes.
          Bytes alt = v;
          bool found = false;
          for (size_t i = 0; i < alt.size() * 8 && !found; ++i) {
            alt = v;
            alt[i / 8] ^= static_cast<uint8_t>(1u << (i % 8));
            try {
              validate_value(t, alt);
              found = true;
            } catch (const CodecError&) {
            }
          }
          REQUIRE(found);
          bad.set_raw(t, alt);
          CHECK_FALSE(verify_ac(s, cov, bad, ac));
        }
      }
    }
  }
}

TEST_CASE("AC coverage mismatch is refused") {
  Rng rng(3);
  const SessionKey s = kdf(MasterKey::generate(rng), Atc{1});
  const auto cov = ac_coverage(3, false, false);
  DataElementMap in = sample_inputs(cov);
  CHECK_THROWS_AS(compute_ac(s, cov, sample_inputs({Tag::kAtc})), CoverageError);
  const Bytes ac = compute_ac(s, cov, in);
  in.set<Tag::kPan>(Pan{"4000001234560019"});
  CHECK_FALSE(verify_ac(s, cov, in, ac));
}

TEST_CASE("coverage sets name the fields each method protects") {
  const auto k2 = ac_coverage(2, false, false);
  CHECK(std::count(k2.begin(), k2.end(), Tag::kAid) == 0);
  const auto k2aid = ac_coverage(2, false, true);
  CHECK(std::count(k2aid.begin(), k2aid.end(), Tag::kAid) == 1);
  const auto k3 = ac_coverage(3, false, false);
  CHECK(std::count(k3.begin(), k3.end(), Tag::kTtq) == 0);
  const auto k3ttq = ac_coverage(3, true, false);
  CHECK(std::count(k3ttq.begin(), k3ttq.end(), Tag::kTtq) == 1);
  const auto cda = sdad_coverage(OdaMethod::kCda);
  CHECK(std::count(cda.begin(), cda.end(), Tag::kAc) == 1);
  const auto dda = sdad_coverage(OdaMethod::kDda);
  CHECK(std::count(dda.begin(), dda.end(), Tag::kAc) == 0);
  const auto fdda = sdad_coverage(OdaMethod::kFdda);
  CHECK(std::count(fdda.begin(), fdda.end(), Tag::kCtq) == 1);
}

TEST_CASE("SDAD signatures bind method header and payload") {
  Rng rng(4);
  const SigningKey sk = SigningKey::generate(rng);
  const DataElementMap cda = sample_inputs(sdad_coverage(OdaMethod::kCda));
  const Bytes sig = sign_sdad(sk, OdaMethod::kCda, cda);
  CHECK(verify_sdad(sk.public_key, OdaMethod::kCda, cda, sig));

  DataElementMap changed = cda;
  changed.set<Tag::kAc>({Bytes(8, 0x12)});
  CHECK_FALSE(verify_sdad(sk.public_key, OdaMethod::kCda, changed, sig));

  // A kernel-3 signature never verifies as a kernel-2 one.
  const DataElementMap fdda = sample_inputs(sdad_coverage(OdaMethod::kFdda));
  const Bytes fsig = sign_sdad(sk, OdaMethod::kFdda, fdda);
  CHECK(verify_sdad(sk.public_key, OdaMethod::kFdda, fdda, fsig));
  CHECK_FALSE(verify_sdad(sk.public_key, OdaMethod::kDda, fdda, fsig));
  CHECK(sdad_header(OdaMethod::kFdda) != sdad_header(OdaMethod::kCda));

  const SigningKey other = SigningKey::generate(rng);
  CHECK_FALSE(verify_sdad(other.public_key, OdaMethod::kCda, cda, sig));
}

TEST_CASE("signing keys are deterministic per seed") {
  Rng a(9), b(9);
  CHECK(SigningKey::generate(a).public_key == SigningKey::generate(b).public_key);
}

TEST_CASE("certificate chain statuses") {
  Rng rng(5);
  const SigningKey ca = SigningKey::generate(rng);
  const SigningKey issuer = SigningKey::generate(rng);
  const SigningKey card = SigningKey::generate(rng);
  CaKeyStore store;
  store.keys[1] = ca.public_key;

  CertificateChain chain;
  chain.ca_index = 1;
  chain.issuer_cert = issue_certificate(ca, "issuer", issuer.public_key);
  chain.card_cert = issue_certificate(issuer, "card", card.public_key);
  ChainResult ok = verify_chain(store, chain);
  CHECK(ok.ok());
  CHECK(ok.card_pk == card.public_key);

  CertificateChain unknown = chain;
  unknown.ca_index = 0xFF;
  CHECK(verify_chain(store, unknown).status == ChainStatus::kLookupFailure);

  CertificateChain forged = chain;
  forged.card_cert->public_key[0] ^= 1;
  CHECK(verify_chain(store, forged).status == ChainStatus::kBadSignature);

  CertificateChain sda = chain;
  sda.card_cert.reset();
  ChainResult s = verify_chain(store, sda);
  CHECK(s.ok());
  CHECK(s.card_pk.empty());
}

TEST_CASE("online PIN blobs") {
  Rng rng(6);
  const PinKey key = PinKey::generate(rng);
  const Bytes blob = encrypt_pin("2580", key, rng);
  CHECK(verify_online_pin(blob, key, "2580"));
  CHECK_FALSE(verify_online_pin(blob, key, "2581"));
  Bytes bad = blob;
  bad.back() ^= 1;
  CHECK_FALSE(verify_online_pin(bad, key, "2580"));
  CHECK_FALSE(verify_online_pin(blob, PinKey::generate(rng), "2580"));
  CHECK_THROWS_AS(encrypt_pin("258", key, rng), MalformedPin);
  // Fresh nonce per encryption.
  CHECK(encrypt_pin("2580", key, rng) != blob);
}

TEST_CASE("CVC3 follows the keyed-hash composition and needs a digit UN") {
  Rng rng(7);
  const Cvc3Key k = Cvc3Key::generate(rng);
  const Un un{123, 3};
  Bytes body = Atc{5}.encode();
  const Bytes u = un.encode();
  body.insert(body.end(), u.begin(), u.end());
  Bytes want = hmac_oracle(k.k, "cvc3", body);
  want.resize(kCvc3Length);
  CHECK(compute_cvc3(k, Atc{5}, un) == want);
  CHECK(compute_cvc3(k, Atc{5}, {124, 3}) != want);
  CHECK(compute_cvc3(k, Atc{6}, un) != want);
  CHECK_THROWS_AS(compute_cvc3(k, Atc{5}, {123, std::nullopt}), CodecError);
}

}  // namespace
}  // namespace emvsim
