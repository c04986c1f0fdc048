#include "emvsim/trace_io.h"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace emvsim {

namespace {

using nlohmann::json;

json map_to_json(const DataElementMap& m) {
  json j = json::object();
  for (const auto& [tag, value] : m) j[std::string(tag_name(tag))] = to_hex(value);
  return j;
}

DataElementMap map_from_json(const json& j) {
  DataElementMap m;
  for (const auto& [name, hex] : j.items()) {
    auto tag = tag_from_name(name);
    if (!tag) throw CodecError("unknown tag " + name);
    m.set_raw(*tag, from_hex(hex.get<std::string>()));
  }
  return m;
}

std::string status_hex(uint16_t sw) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04X", sw);
  return buf;
}

json message_to_json(const Message& m) {
  return {
      {"direction", m.direction == Direction::kCommand ? "command" : "response"},
      {"name", std::string(msg_name(m.name))},
      {"status", status_hex(m.status)},
      {"payload", map_to_json(m.payload)},
  };
}

Message message_from_json(const json& j) {
  Message m;
  const std::string dir = j.at("direction").get<std::string>();
  if (dir != "command" && dir != "response") throw CodecError("bad direction " + dir);
  m.direction = dir == "command" ? Direction::kCommand : Direction::kResponse;
  auto name = msg_name_from(j.at("name").get<std::string>());
  if (!name) throw CodecError("unknown message name");
  m.name = *name;
  m.status = static_cast<uint16_t>(std::stoul(j.at("status").get<std::string>(), nullptr, 16));
  m.payload = map_from_json(j.at("payload"));
  return m;
}

}  // namespace

std::string entry_to_jsonl(const TraceEntry& entry) {
  json j;
  if (const auto* e = std::get_if<Event>(&entry)) {
    j = {
        {"type", "event"},
        {"index", e->index},
        {"run", e->run},
        {"channel", std::string(channel_name(e->channel))},
        {"from", e->from},
        {"to", e->to},
        {"sent", message_to_json(e->sent)},
        {"delivered", message_to_json(e->delivered)},
        {"relay_active", e->relay_active},
        {"latency", e->latency},
    };
  } else {
    const auto& m = std::get<Marker>(entry);
    json absent = json::array();
    for (Tag t : m.absent) absent.push_back(std::string(tag_name(t)));
    j = {
        {"type", "marker"},
        {"index", m.index},
        {"run", m.run},
        {"kind", m.kind},
        {"agent", m.agent},
        {"data", map_to_json(m.data)},
        {"absent", absent},
        {"attrs", m.attrs},
    };
  }
  return j.dump();
}

TraceEntry entry_from_jsonl(std::string_view line) {
  try {
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "event") {
      Event e;
      e.index = j.at("index").get<int>();
      e.run = j.at("run").get<int>();
      auto ch = channel_from(j.at("channel").get<std::string>());
      if (!ch) throw CodecError("unknown channel");
      e.channel = *ch;
      e.from = j.at("from").get<std::string>();
      e.to = j.at("to").get<std::string>();
      e.sent = message_from_json(j.at("sent"));
      e.delivered = message_from_json(j.at("delivered"));
      e.relay_active = j.at("relay_active").get<bool>();
      e.latency = j.at("latency").get<int>();
      return e;
    }
    if (type == "marker") {
      Marker m;
      m.index = j.at("index").get<int>();
      m.run = j.at("run").get<int>();
      m.kind = j.at("kind").get<std::string>();
      m.agent = j.at("agent").get<std::string>();
      m.data = map_from_json(j.at("data"));
      for (const auto& t : j.at("absent")) {
        auto tag = tag_from_name(t.get<std::string>());
        if (!tag) throw CodecError("unknown tag in absent list");
        m.absent.push_back(*tag);
      }
      m.attrs = j.at("attrs").get<std::map<std::string, std::string>>();
      return m;
    }
    throw CodecError("unknown entry type " + type);
  } catch (const json::exception& e) {
    throw CodecError(std::string("malformed trace line: ") + e.what());
  }
}

void write_jsonl(std::ostream& out, const Trace& trace) {
  for (const auto& e : trace.entries()) out << entry_to_jsonl(e) << '\n';
}

std::string to_jsonl(const Trace& trace) {
  std::ostringstream ss;
  write_jsonl(ss, trace);
  return ss.str();
}

std::vector<TraceEntry> read_jsonl(std::istream& in) {
  std::vector<TraceEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(entry_from_jsonl(line));
  }
  return out;
}

}  // namespace emvsim
