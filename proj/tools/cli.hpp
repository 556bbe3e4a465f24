#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace zeroclust::cli {

/// Exit codes: 0 success, 1 usage or bad parameter, 2 data or validation
/// failure, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zeroclust::cli
