#pragma once

// Runs the segfilter binary (path injected by CMake) and captures its exit
// code and combined output.

#include <cstdlib>
#include <string>

#include <sys/wait.h>

#include "support.hpp"

namespace testsupport {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

inline CliResult run_cli(const std::string& args) {
  static TempDir capture_dir;
  static int counter = 0;
  const std::filesystem::path capture =
      capture_dir / ("out_" + std::to_string(counter++) + ".txt");
  const std::string command = std::string(SEGFILTER_BIN) + " " + args + " > " +
                              capture.string() + " 2>&1";
  const int status = std::system(command.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = slurp(capture);
  return result;
}

}  // namespace testsupport
