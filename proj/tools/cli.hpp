#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "bufnet/error.hpp"

namespace bufnet::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitUnstable = 3,
    kExitInfeasible = 4,
    kExitNumerical = 5,
};

int exit_code_for(Errc code) noexcept;

/// args excludes the program name. Diagnostics go to `log`.
int run(const std::vector<std::string>& args, std::ostream& log);

} // namespace bufnet::cli
