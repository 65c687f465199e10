#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace rvar {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// args[0] is the program name. Files go to the project store ($RVAR_STORE)
// unless --out says otherwise.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rvar
