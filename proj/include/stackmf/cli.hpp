#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stackmf {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitIo = 1,
  kExitValidation = 2,
  kExitBlowUp = 3,
  kExitGridMismatch = 4,
  kExitVerification = 5,
  kExitUsage = 64,
};

// Runs `stackmf <subcommand> ...`; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);

}  // namespace stackmf
