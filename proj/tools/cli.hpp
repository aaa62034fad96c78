#pragma once

#include <ostream>
#include <string>

namespace koopman::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kData = 3;
inline constexpr int kNumeric = 4;

// Runs one command line; messages go to `out` / `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

}  // namespace koopman::cli
