// JSON Lines import and export of traces. One entry per line; keys are
// emitted in sorted order so equal traces serialize to identical bytes.

#ifndef EMVSIM_TRACE_IO_H_
#define EMVSIM_TRACE_IO_H_

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "emvsim/channel.h"

namespace emvsim {

std::string entry_to_jsonl(const TraceEntry& e);
// Throws CodecError on a malformed line.
TraceEntry entry_from_jsonl(std::string_view line);

void write_jsonl(std::ostream& out, const Trace& trace);
std::string to_jsonl(const Trace& trace);
std::vector<TraceEntry> read_jsonl(std::istream& in);

}  // namespace emvsim

#endif  // EMVSIM_TRACE_IO_H_
