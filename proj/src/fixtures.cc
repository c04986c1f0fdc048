#include "emvsim/fixtures.h"

#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"

namespace emvsim {

namespace {

using nlohmann::json;

// Reads typed fields from one JSON object and rejects keys never read.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail("field '" + key + "': " + e.what());
    }
  }

  template <typename T>
  T require(const std::string& key) {
    if (!has(key)) fail("missing field '" + key + "'");
    return get<T>(key, T{});
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void done() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) fail("unknown field '" + k + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Aid parse_aid(const std::string& label, const Reader& r) {
  auto aid = aid_from_label(label);
  if (!aid) r.fail("unknown AID '" + label + "'");
  return *aid;
}

std::vector<Aid> parse_aids(Reader& r, const std::string& key) {
  std::vector<Aid> out;
  for (const auto& s : r.require<std::vector<std::string>>(key)) out.push_back(parse_aid(s, r));
  return out;
}

ActionCodes parse_action_codes(const json& j, const std::string& where) {
  Reader r(j, where);
  ActionCodes c;
  c.denial.cda_failed = r.get<bool>("denial", false);
  c.online.cda_failed = r.get<bool>("online", false);
  c.default_.cda_failed = r.get<bool>("default", false);
  r.done();
  return c;
}

CvmList parse_cvm_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": cvm_list must be an array");
  CvmList list;
  for (const auto& e : j) {
    Reader r(e, where + ".cvm_list");
    auto m = cvm_method_from_name(r.require<std::string>("method"));
    auto c = cvm_condition_from_name(r.get<std::string>("condition", "always"));
    if (!m || !c) r.fail("bad CVM rule");
    list.rules.push_back({*m, *c});
    r.done();
  }
  return list;
}

CardProfile card_from_json(const json& j) {
  Reader r(j, "card " + (j.is_object() ? j.value("id", std::string("?")) : std::string("?")));
  CardProfile p;
  p.id = r.require<std::string>("id");
  p.pan = {r.require<std::string>("pan")};
  p.expiry = Expiry::parse(r.require<std::string>("expiry"));
  p.cardholder_name = r.get<std::string>("cardholder_name", "CARDHOLDER");
  p.aids = parse_aids(r, "aids");
  for (const auto& s : r.get<std::vector<std::string>>("oda", {})) {
    auto m = oda_method_from_name(s);
    if (!m) r.fail("unknown ODA method '" + s + "'");
    p.oda_methods.insert(*m);
  }
  p.aip.cardholder_verification_supported = r.get<bool>("cardholder_verification", true);
  p.aip.emv_mode_supported = r.get<bool>("emv_mode", true);
  if (r.has("cvm_list")) p.cvm_list = parse_cvm_list(r.at("cvm_list"), r.where());
  if (r.has("iac")) p.iac = parse_action_codes(r.at("iac"), r.where() + ".iac");
  p.service_code = r.get<std::string>("service_code", p.service_code);
  p.track_cvv = r.get<std::string>("track_cvv", p.track_cvv);
  if (r.has("printed_csc")) p.printed_csc = r.get<std::string>("printed_csc", "");
  p.home_currency = r.get<std::string>("home_currency", p.home_currency);
  p.pin = r.require<std::string>("pin");
  p.offline_pin_enabled = r.get<bool>("offline_pin", false);
  p.pin_try_limit = r.get<uint8_t>("pin_try_limit", p.pin_try_limit);
  p.pin_try_counter = p.pin_try_limit;
  p.foreign_currency_no_cvm = r.get<bool>("foreign_currency_no_cvm", false);
  if (r.has("card_cvm_limit")) p.card_cvm_limit = r.get<uint64_t>("card_cvm_limit", 0);
  const std::string device = r.get<std::string>("device", "plastic");
  if (device == "plastic") {
    p.device_type = DeviceType::kPlastic;
  } else if (device == "phone") {
    p.device_type = DeviceType::kPhone;
  } else {
    r.fail("unknown device '" + device + "'");
  }
  auto wallet = wallet_from(r.get<std::string>("wallet", "none"));
  if (!wallet) r.fail("unknown wallet");
  p.wallet = *wallet;
  const std::string lock = r.get<std::string>("lock", "unlocked");
  if (lock != "locked" && lock != "unlocked") r.fail("lock must be locked or unlocked");
  p.lock = lock == "locked" ? LockState::kLocked : LockState::kUnlocked;
  p.wallet_always_cdcvm = r.get<bool>("wallet_always_cdcvm", false);
  p.magic_byte_unlock = r.get<bool>("magic_byte_unlock", false);
  p.transit_magic_bytes = from_hex(r.get<std::string>("transit_magic_bytes", ""));
  p.track_data_in_emv = r.get<bool>("track_data_in_emv", false);
  p.ac_covers_aid = r.get<bool>("ac_covers_aid", false);
  if (r.has("magstripe")) {
    Reader m(r.at("magstripe"), r.where() + ".magstripe");
    p.magstripe = MagstripeProfile{m.get<uint8_t>("n_un_digits", 3), {}};
    m.done();
  }
  p.read_record_latency = r.get<int>("read_record_latency", 0);
  r.done();
  if (!luhn_valid(p.pan.digits)) r.fail("PAN fails Luhn");
  return p;
}

TerminalConfig terminal_from_json(const json& j) {
  Reader r(j, "terminal " + (j.is_object() ? j.value("id", std::string("?")) : std::string("?")));
  TerminalConfig c;
  c.id = r.require<std::string>("id");
  c.terminal_id = r.get<std::string>("terminal_id", c.id);
  c.supported_aids = parse_aids(r, "supported_aids");
  if (r.has("tac")) c.tac = parse_action_codes(r.at("tac"), r.where() + ".tac");
  c.cvm_required_limit = r.get<uint64_t>("cvm_required_limit", c.cvm_required_limit);
  c.contactless_ceiling = r.get<uint64_t>("contactless_ceiling", c.contactless_ceiling);
  c.floor_limit = r.get<uint64_t>("floor_limit", c.floor_limit);
  c.currency = r.get<std::string>("currency", c.currency);
  c.online_capable = r.get<bool>("online_capable", c.online_capable);
  c.kernel2_cdcvm_supported = r.get<bool>("kernel2_cdcvm_supported", c.kernel2_cdcvm_supported);
  if (r.has("fixed_un")) c.fixed_un = Un{r.get<uint32_t>("fixed_un", 0), std::nullopt};
  c.retry_un_on_failure = r.get<bool>("retry_un_on_failure", c.retry_un_on_failure);
  c.retry_budget = r.get<int>("retry_budget", c.retry_budget);
  c.magstripe_supported = r.get<bool>("magstripe_supported", c.magstripe_supported);
  c.merchant_id = r.require<std::string>("merchant_id");
  c.mcc = {r.require<uint16_t>("mcc")};
  if (r.has("transit")) {
    Reader t(r.at("transit"), r.where() + ".transit");
    c.transit = TransitSettings{from_hex(t.require<std::string>("magic_bytes"))};
    t.done();
  }
  c.latency_budget = r.get<int>("latency_budget", c.latency_budget);
  c.relay_protection = r.get<bool>("relay_protection", c.relay_protection);
  c.kernel3_require_fdda = r.get<bool>("kernel3_require_fdda", c.kernel3_require_fdda);
  c.decline_on_ca_lookup_failure =
      r.get<bool>("decline_on_ca_lookup_failure", c.decline_on_ca_lookup_failure);
  c.diligent_cashier = r.get<bool>("diligent_cashier", c.diligent_cashier);
  if (r.has("ttq")) {
    Reader t(r.at("ttq"), r.where() + ".ttq");
    c.ttq_online_pin = t.get<bool>("online_pin", c.ttq_online_pin);
    c.ttq_signature = t.get<bool>("signature", c.ttq_signature);
    c.ttq_oda_for_online = t.get<bool>("oda_for_online", c.ttq_oda_for_online);
    t.done();
  }
  r.done();
  c.check();
  return c;
}

IssuerPolicy issuer_from_json(const json& j) {
  Reader r(j, "issuer " + (j.is_object() ? j.value("id", std::string("?")) : std::string("?")));
  IssuerPolicy p;
  p.id = r.require<std::string>("id");
  p.check_atc_order = r.get<bool>("check_atc_order", false);
  p.check_un_reuse = r.get<bool>("check_un_reuse", false);
  p.check_aid_pan_match = r.get<bool>("check_aid_pan_match", false);
  p.check_plastic_cdcvm = r.get<bool>("check_plastic_cdcvm", false);
  p.check_ttq_in_ac = r.get<bool>("check_ttq_in_ac", false);
  p.check_mcc_for_wallet_no_cdcvm = r.get<bool>("check_mcc_for_wallet_no_cdcvm", false);
  p.foreign_cvm_limit_enforced = r.get<bool>("foreign_cvm_limit_enforced", false);
  p.enforce_cvm_limit = r.get<bool>("enforce_cvm_limit", false);
  p.cvm_limit = r.get<uint64_t>("cvm_limit", p.cvm_limit);
  p.home_currency = r.get<std::string>("home_currency", p.home_currency);
  r.done();
  return p;
}

json parse_text(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

struct Catalog {
  std::vector<CardProfile> cards;
  std::vector<TerminalConfig> terminals;
  std::vector<IssuerPolicy> issuers;
};

json read_file(const std::string& name) {
  const std::string path = fixture_dir() + "/" + name;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open fixture file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

template <typename T, typename F>
std::vector<T> load_list(const std::string& file, const std::string& key, F parse) {
  json j = read_file(file);
  if (!j.is_object() || !j.contains(key) || !j.at(key).is_array()) {
    throw ConfigError(file + ": expected an object with array '" + key + "'");
  }
  std::vector<T> out;
  std::set<std::string> ids;
  for (const auto& e : j.at(key)) {
    out.push_back(parse(e));
    if (!ids.insert(out.back().id).second) throw ConfigError(file + ": duplicate id " + out.back().id);
  }
  return out;
}

const Catalog& catalog() {
  static std::once_flag once;
  static Catalog c;
  std::call_once(once, [] {
    c.cards = load_list<CardProfile>("cards.json", "cards", card_from_json);
    c.terminals = load_list<TerminalConfig>("terminals.json", "terminals", terminal_from_json);
    c.issuers = load_list<IssuerPolicy>("issuers.json", "issuers", issuer_from_json);
  });
  return c;
}

template <typename T>
const T& find_by_id(const std::vector<T>& v, std::string_view id, const char* what) {
  for (const auto& e : v) {
    if (e.id == id) return e;
  }
  throw ConfigError(std::string("unknown ") + what + " fixture: " + std::string(id));
}

template <typename T>
std::vector<std::string> ids_of(const std::vector<T>& v) {
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(e.id);
  return out;
}

}  // namespace

std::string fixture_dir() {
  if (const char* env = std::getenv("EMVSIM_FIXTURE_DIR")) return env;
  return EMVSIM_FIXTURE_DIR;
}

CardProfile load_card(std::string_view id) { return find_by_id(catalog().cards, id, "card"); }
TerminalConfig load_terminal(std::string_view id) {
  return find_by_id(catalog().terminals, id, "terminal");
}
IssuerPolicy load_issuer(std::string_view id) {
  return find_by_id(catalog().issuers, id, "issuer");
}

std::vector<std::string> card_ids() { return ids_of(catalog().cards); }
std::vector<std::string> terminal_ids() { return ids_of(catalog().terminals); }
std::vector<std::string> issuer_ids() { return ids_of(catalog().issuers); }

CardProfile parse_card(std::string_view text) { return card_from_json(parse_text(text, "card")); }
TerminalConfig parse_terminal(std::string_view text) {
  return terminal_from_json(parse_text(text, "terminal"));
}
IssuerPolicy parse_issuer(std::string_view text) {
  return issuer_from_json(parse_text(text, "issuer"));
}

}  // namespace emvsim
