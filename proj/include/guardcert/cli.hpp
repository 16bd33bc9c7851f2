#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace guardcert::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolation = 2;

/// Seed used when neither --seed nor GUARDCERT_SEED is given.
inline constexpr std::uint64_t kDefaultSeed = 20240611;

/// Runs one command line; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace guardcert::cli
