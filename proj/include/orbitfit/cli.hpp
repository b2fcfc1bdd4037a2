#ifndef ORBITFIT_CLI_HPP
#define ORBITFIT_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace orbitfit {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitParse = 2,
  kExitShape = 3,
  kExitIo = 4,
};

/// Entry point of the orbitfit tool; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orbitfit

#endif  // ORBITFIT_CLI_HPP
