#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lcgeom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBadInput = 3;

// args excludes the program name. Results go to out, diagnostics to err
// (unless --output redirects the result to a file).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lcgeom::cli
