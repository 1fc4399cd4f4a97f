#ifndef ZRNMT_CLI_HPP
#define ZRNMT_CLI_HPP

#include <string>
#include <vector>

namespace zrnmt {

// Runs one CLI command; args excludes the program name.
// Exit codes: 0 success, 1 usage error, 2 data/O error, 3 numeric failure.
int run(const std::vector<std::string>& args);

}  // namespace zrnmt

#endif
