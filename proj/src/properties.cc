#include "emvsim/properties.h"

#include <algorithm>
#include <sstream>

namespace emvsim {

namespace {

constexpr std::pair<AttackClass, std::string_view> kClassNames[] = {
    {AttackClass::kNone, "none"},
    {AttackClass::kPinBypass, "pin_bypass"},
    {AttackClass::kReplay, "replay"},
    {AttackClass::kCloning, "cloning"},
    {AttackClass::kDos, "dos"},
    {AttackClass::kSecrecy, "secrecy"},
    {AttackClass::kMerchantBag, "merchant_bag"},
    {AttackClass::kMitmAccept, "mitm_accept"},
};

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename Range>
std::string join(const Range& items) {
  std::string out;
  for (const auto& i : items) {
    if (!out.empty()) out += ',';
    out += i;
  }
  return out;
}

// Per-run view of the markers the checks need.
struct RunView {
  std::vector<const Marker*> card_claims;
  std::vector<const Marker*> terminal_claims;
  std::vector<const Marker*> issuer_claims;
  std::vector<const Marker*> terminal_decisions;
  std::vector<const Marker*> issuer_decisions;
  std::vector<const Marker*> intents;
  std::vector<const Marker*> cvm_events;
  std::vector<const Event*> relay_events;
  bool has_nfc = false;
};

std::map<int, RunView> index_runs(const Trace& trace) {
  std::map<int, RunView> runs;
  for (const auto& entry : trace.entries()) {
    if (const auto* e = std::get_if<Event>(&entry)) {
      if (e->channel != ChannelId::kNfc) continue;
      RunView& r = runs[e->run];
      r.has_nfc = true;
      if (e->relay_active) r.relay_events.push_back(e);
      continue;
    }
    const auto& m = std::get<Marker>(entry);
    RunView& r = runs[m.run];
    if (m.kind == marker::kCardClaim) r.card_claims.push_back(&m);
    else if (m.kind == marker::kTerminalClaim) r.terminal_claims.push_back(&m);
    else if (m.kind == marker::kIssuerClaim) r.issuer_claims.push_back(&m);
    else if (m.kind == marker::kTerminalDecision) r.terminal_decisions.push_back(&m);
    else if (m.kind == marker::kIssuerDecision) r.issuer_decisions.push_back(&m);
    else if (m.kind == marker::kCardholderIntent) r.intents.push_back(&m);
    else if (m.kind == marker::kCvmEvent) r.cvm_events.push_back(&m);
  }
  return runs;
}

std::optional<Amount> amount_of(const DataElementMap& d) {
  if (!d.has(Tag::kAmount) || !d.has(Tag::kCurrency)) return std::nullopt;
  return get_amount(d);
}

// A cryptogram identifies the card-side computation it came from.
std::optional<std::string> cryptogram_key(const DataElementMap& d) {
  const Bytes* atc = d.raw(Tag::kAtc);
  if (!atc) return std::nullopt;
  if (const Bytes* cvc3 = d.raw(Tag::kCvc3)) return "cvc3:" + to_hex(*atc) + ":" + to_hex(*cvc3);
  if (const Bytes* ac = d.raw(Tag::kAc)) return "ac:" + to_hex(*atc) + ":" + to_hex(*ac);
  return std::nullopt;
}

// One agent's statement about a field: a value, ⊥, or nothing.
struct Statement {
  bool present = false;
  std::optional<Bytes> value;
};

Statement statement(const std::vector<const Marker*>& claims, Tag t) {
  Statement s;
  for (const Marker* m : claims) {
    if (const Bytes* v = m->data.raw(t)) {
      s = {true, *v};
    } else if (std::find(m->absent.begin(), m->absent.end(), t) != m->absent.end()) {
      s = {true, std::nullopt};
    }
  }
  return s;
}

PropertyResult satisfied() { return {PropertyVerdict::kSatisfied, {}, {}}; }

void violate(PropertyResult& r, int index) {
  r.verdict = PropertyVerdict::kViolated;
  if (std::find(r.evidence.begin(), r.evidence.end(), index) == r.evidence.end()) {
    r.evidence.push_back(index);
  }
}

}  // namespace

std::string_view attack_class_name(AttackClass c) {
  for (const auto& [k, v] : kClassNames) {
    if (k == c) return v;
  }
  return "?";
}

std::optional<AttackClass> attack_class_from(std::string_view s) {
  for (const auto& [k, v] : kClassNames) {
    if (v == s) return k;
  }
  return std::nullopt;
}

const std::vector<std::string_view>& property_keys() {
  static const std::vector<std::string_view> kKeys = {kP1, kP2, kP3, kP31, kP32, kP4, kP5, kP6};
  return kKeys;
}

const std::set<std::string>& base_secrets() {
  static const std::set<std::string> kBase = {std::string(secret::kPin), std::string(secret::kMk),
                                              std::string(secret::kSkC)};
  return kBase;
}

std::string_view verdict_name(PropertyVerdict v) {
  switch (v) {
    case PropertyVerdict::kSatisfied: return "satisfied";
    case PropertyVerdict::kViolated: return "violated";
    case PropertyVerdict::kNotApplicable: return "not_applicable";
    case PropertyVerdict::kNotEvaluated: return "not_evaluated";
  }
  return "?";
}

const PropertyResult& PropertyReport::at(std::string_view key) const {
  auto it = results.find(key);
  if (it == results.end()) throw ConfigError("no result for " + std::string(key));
  return it->second;
}

std::vector<std::string> PropertyReport::violated_labels() const {
  std::vector<std::string> out;
  for (auto key : property_keys()) {
    auto it = results.find(key);
    if (it == results.end() || !it->second.violated()) continue;
    std::string label(key);
    if (!it->second.details.empty()) label += "(" + join(it->second.details) + ")";
    out.push_back(std::move(label));
  }
  return out;
}

bool PropertyReport::any_violation() const {
  return std::any_of(results.begin(), results.end(),
                     [](const auto& kv) { return kv.second.violated(); });
}

std::map<std::string, std::string> ScenarioMeta::to_attrs() const {
  std::vector<std::string> knob_items;
  for (const auto& [k, v] : knobs) knob_items.push_back(k + "=" + v);
  std::vector<std::string> caps;
  for (Capability c : capabilities) caps.push_back(capability_name(c));
  return {
      {"id", id},
      {"title", title},
      {"class", std::string(attack_class_name(cls))},
      {"agreement", join(agreement)},
      {"secrets", join(secrets)},
      {"cvm_limit", std::to_string(cvm_limit)},
      {"knobs", join(knob_items)},
      {"flaws", join(flaws)},
      {"capabilities", join(caps)},
  };
}

ScenarioMeta ScenarioMeta::from_attrs(const std::map<std::string, std::string>& attrs) {
  auto get = [&](const char* key) {
    auto it = attrs.find(key);
    return it == attrs.end() ? std::string() : it->second;
  };
  ScenarioMeta m;
  m.id = get("id");
  m.title = get("title");
  auto cls = attack_class_from(get("class"));
  if (!cls) throw ConfigError("scenario_meta: unknown class '" + get("class") + "'");
  m.cls = *cls;
  m.agreement = split(get("agreement"));
  for (auto& s : split(get("secrets"))) m.secrets.insert(std::move(s));
  try {
    m.cvm_limit = std::stoull(get("cvm_limit"));
  } catch (const std::exception&) {
    throw ConfigError("scenario_meta: bad cvm_limit");
  }
  for (const auto& item : split(get("knobs"))) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("scenario_meta: bad knob '" + item + "'");
    m.knobs[item.substr(0, eq)] = item.substr(eq + 1);
  }
  m.flaws = split(get("flaws"));
  for (const auto& c : split(get("capabilities"))) {
    auto cap = capability_from(c);
    if (!cap) throw ConfigError("scenario_meta: bad capability '" + c + "'");
    m.capabilities.insert(*cap);
  }
  return m;
}

ScenarioMeta meta_of(const Trace& trace) {
  auto metas = trace.markers(marker::kScenarioMeta);
  if (metas.empty()) throw ConfigError("trace has no scenario_meta marker");
  return ScenarioMeta::from_attrs(metas.front()->attrs);
}

std::vector<Acceptance> acceptances(const Trace& trace) {
  std::vector<Acceptance> out;
  for (const auto& [run, view] : index_runs(trace)) {
    if (!view.terminal_decisions.empty()) {
      for (const Marker* d : view.terminal_decisions) {
        const std::string decision = d->attr("decision");
        if (decision != "accepted_offline" && decision != "accepted_online") continue;
        out.push_back({run, d->index, decision == "accepted_offline", true, amount_of(d->data)});
      }
      continue;
    }
    for (const Marker* d : view.issuer_decisions) {
      if (d->attr("kind") != "auth" || d->attr("decision") != "approve") continue;
      out.push_back({run, d->index, false, false, amount_of(d->data)});
    }
  }
  return out;
}

PropertyReport evaluate(const Trace& trace, const ScenarioMeta& meta) {
  const auto runs = index_runs(trace);
  const auto accepted = acceptances(trace);

  // Card claims by cryptogram, for acceptances whose run holds no card view.
  std::map<std::string, const Marker*> claim_by_cryptogram;
  for (const auto& [run, view] : runs) {
    for (const Marker* m : view.card_claims) {
      if (auto key = cryptogram_key(m->data)) claim_by_cryptogram.emplace(*key, m);
    }
  }

  std::vector<Tag> fields = {Tag::kPan, Tag::kAmount, Tag::kCurrency};
  bool check_replay = false;
  for (const auto& name : meta.agreement) {
    if (name == kReplayField) {
      check_replay = true;
      continue;
    }
    auto t = tag_from_name(name);
    if (!t) throw ConfigError("agreement: unknown field '" + name + "'");
    if (std::find(fields.begin(), fields.end(), *t) == fields.end()) fields.push_back(*t);
  }

  PropertyReport report;
  const bool any_acceptance = !accepted.empty();
  for (auto key : {kP1, kP2, kP3, kP31, kP32}) {
    report.results[std::string(key)] =
        any_acceptance ? satisfied() : PropertyResult{PropertyVerdict::kNotApplicable, {}, {}};
  }
  report.results[std::string(kP4)] = {PropertyVerdict::kNotEvaluated, {}, {}};

  for (const Acceptance& a : accepted) {
    const RunView& view = runs.at(a.run);

    // P1: every pair of agent views that speak about a field must agree.
    std::vector<const Marker*> card = view.card_claims;
    const Marker* linked = nullptr;
    if (card.empty()) {
      for (const auto* claims : {&view.terminal_claims, &view.issuer_claims}) {
        for (const Marker* m : *claims) {
          auto key = cryptogram_key(m->data);
          if (!key) continue;
          auto it = claim_by_cryptogram.find(*key);
          if (it != claim_by_cryptogram.end()) linked = it->second;
        }
      }
      if (linked) card = {linked};
    }
    PropertyResult& p1 = report.results[std::string(kP1)];
    for (Tag t : fields) {
      std::vector<Statement> views = {statement(card, t), statement(view.terminal_claims, t),
                                      statement(view.issuer_claims, t)};
      std::optional<Statement> first;
      bool differ = false;
      for (const auto& s : views) {
        if (!s.present) continue;
        if (!first) {
          first = s;
        } else if (s.value != first->value) {
          differ = true;
        }
      }
      if (differ) {
        violate(p1, a.index);
        p1.details.insert(std::string(tag_name(t)));
      }
    }
    if (check_replay && linked && linked->run != a.run) {
      violate(p1, a.index);
      p1.evidence.push_back(linked->index);
      p1.details.insert(std::string(kReplayField));
    }

    // P2: an offline acceptance must survive clearing.
    if (a.offline) {
      for (const Marker* d : view.issuer_decisions) {
        if (d->attr("kind") == "clearing" && d->attr("decision") == "decline") {
          violate(report.results[std::string(kP2)], a.index);
          report.results[std::string(kP2)].evidence.push_back(d->index);
        }
      }
    }

    // P3: the cardholder meant this payment.
    bool intended = false;
    for (const Marker* m : view.intents) {
      if (amount_of(m->data) == a.amount) intended = true;
    }
    if (!intended) violate(report.results[std::string(kP3)], a.index);

    // P3.1: high value needs a CVM event in the run.
    if (a.amount && a.amount->value > meta.cvm_limit && view.cvm_events.empty()) {
      violate(report.results[std::string(kP31)], a.index);
    }

    // P3.2: the card was at the terminal, not behind a relay or absent.
    if (!view.relay_events.empty() || !view.has_nfc) {
      PropertyResult& p32 = report.results[std::string(kP32)];
      violate(p32, a.index);
      if (!view.relay_events.empty()) p32.evidence.push_back(view.relay_events.front()->index);
    }
  }

  // P5: adversary knowledge must not reach any secret category.
  PropertyResult p5 = satisfied();
  std::set<std::string> secrets = base_secrets();
  secrets.insert(meta.secrets.begin(), meta.secrets.end());
  for (const Marker* m : trace.markers(marker::kKnowledgeAdd)) {
    const std::string cat = m->attr("category");
    if (!secrets.count(cat)) continue;
    violate(p5, m->index);
    p5.details.insert(cat);
  }
  report.results[std::string(kP5)] = p5;

  // P6: a genuine transaction after the attack must still go through.
  PropertyResult p6 = satisfied();
  for (const Marker* m : trace.markers(marker::kAvailabilityProbe)) {
    if (m->attr("result") != "ok") violate(p6, m->index);
  }
  report.results[std::string(kP6)] = p6;

  for (auto& [key, r] : report.results) std::sort(r.evidence.begin(), r.evidence.end());
  return report;
}

PropertyReport evaluate(const Trace& trace) { return evaluate(trace, meta_of(trace)); }

bool attack_succeeded(const Trace& trace, const ScenarioMeta& meta, const PropertyReport& report) {
  const auto runs = index_runs(trace);
  auto attack_run = [&](int run) {
    for (const Marker* m : trace.markers(marker::kSession)) {
      if (m->run == run) return m->attr("kind") == "attack";
    }
    return false;
  };
  const auto accepted = acceptances(trace);
  switch (meta.cls) {
    case AttackClass::kNone: return false;
    case AttackClass::kPinBypass:
      return std::any_of(accepted.begin(), accepted.end(), [&](const Acceptance& a) {
        return attack_run(a.run) && a.terminal && a.amount && a.amount->value > meta.cvm_limit &&
               runs.at(a.run).cvm_events.empty();
      });
    case AttackClass::kReplay:
      for (const auto& [run, view] : runs) {
        if (!attack_run(run)) continue;
        for (const Marker* d : view.issuer_decisions) {
          if (d->attr("kind") == "auth" && d->attr("decision") == "approve") return true;
        }
      }
      return false;
    case AttackClass::kCloning:
    case AttackClass::kMitmAccept:
      return std::any_of(accepted.begin(), accepted.end(),
                         [&](const Acceptance& a) { return attack_run(a.run); });
    case AttackClass::kDos: return report.at(kP6).violated();
    case AttackClass::kSecrecy: {
      const auto& cats = report.at(kP5).details;
      return std::any_of(cats.begin(), cats.end(),
                         [&](const std::string& c) { return meta.secrets.count(c) != 0; });
    }
    case AttackClass::kMerchantBag:
      return std::any_of(accepted.begin(), accepted.end(), [&](const Acceptance& a) {
        if (!a.offline || !attack_run(a.run)) return false;
        for (const Marker* d : runs.at(a.run).issuer_decisions) {
          if (d->attr("kind") == "clearing" && d->attr("decision") == "decline") return true;
        }
        return false;
      });
  }
  return false;
}

std::vector<std::string> compare_expected(const PropertyReport& report,
                                          const std::set<Capability>& used,
                                          const std::vector<std::string>& flaws, bool succeeded,
                                          const Expectation& expected) {
  std::vector<std::string> diff;
  if (!succeeded) diff.push_back("attack did not succeed");
  for (auto key : property_keys()) {
    const std::string k(key);
    const bool want = expected.properties.count(k) != 0;
    const bool got = report.at(key).violated();
    if (want != got) diff.push_back(k + (want ? ": expected violated" : ": unexpected violation"));
  }
  auto compare_set = [&](const std::string& what, const std::set<std::string>& want,
                         const std::set<std::string>& got) {
    if (want != got) diff.push_back(what + ": expected {" + join(want) + "}, got {" + join(got) + "}");
  };
  if (expected.properties.count(std::string(kP1))) {
    compare_set("P1 fields", expected.p1_fields, report.at(kP1).details);
  }
  if (expected.properties.count(std::string(kP5))) {
    compare_set("P5 categories", expected.p5_categories, report.at(kP5).details);
  }
  std::set<std::string> want_caps, got_caps;
  for (Capability c : expected.capabilities) want_caps.insert(capability_name(c));
  for (Capability c : used) got_caps.insert(capability_name(c));
  compare_set("capabilities", want_caps, got_caps);
  compare_set("flaws", expected.flaws, std::set<std::string>(flaws.begin(), flaws.end()));
  return diff;
}

std::set<Capability> capabilities_used(const Trace& trace) {
  std::set<Capability> out;
  for (const Marker* m : trace.markers(marker::kCapabilityUse)) {
    if (auto c = capability_from(m->attr("capability"))) out.insert(*c);
  }
  return out;
}

}  // namespace emvsim
