// Helpers shared by the unit tests.

#ifndef EMVSIM_TESTS_TEST_UTIL_H_
#define EMVSIM_TESTS_TEST_UTIL_H_

#include <string>
#include <vector>

#include "emvsim/channel.h"

namespace emvsim::testing {

inline std::vector<const Marker*> markers_in_run(const Trace& trace, std::string_view kind,
                                                 int run) {
  std::vector<const Marker*> out;
  for (const Marker* m : trace.markers(kind)) {
    if (m->run == run) out.push_back(m);
  }
  return out;
}

inline const Marker* last_marker(const Trace& trace, std::string_view kind) {
  auto all = trace.markers(kind);
  return all.empty() ? nullptr : all.back();
}

}  // namespace emvsim::testing

#endif  // EMVSIM_TESTS_TEST_UTIL_H_
