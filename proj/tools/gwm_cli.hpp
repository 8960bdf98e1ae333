#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gwm::cli {

// Runs the gwm command line. Exit codes: 0 success, 1 usage error, 2 runtime
// error. Streams are injectable so tests can capture output.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace gwm::cli
