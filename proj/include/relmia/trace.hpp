#pragma once

#include <string>
#include <vector>

namespace relmia {

// Ordered record of file reads and pipeline stage transitions. Used by
// integration tests to prove the audit pipeline touches no real data (train or
// holdout files) before encoder training has completed.
struct RunTrace {
  std::vector<std::string> events;

  void read(const std::string& path) { events.push_back("read:" + path); }
  void stage(const std::string& name) { events.push_back("stage:" + name); }
};

}  // namespace relmia
