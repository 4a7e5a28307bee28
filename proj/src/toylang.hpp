#pragma once

#include <string>

namespace lsi {

// Interpreter for the built-in "toy" language: integer expressions and one
// statement per line, enough to write hermetic harness fixtures.
//
//   x = 2 * (3 + 4)      assignment
//   print x              append a line to output
//   assert x == 14       exit 1 when false
//   spam N               print N filler lines
//   loop                 spin forever (timeout fixtures)
//   crash                abort() (signal fixtures)
//   # ...                comment
//
// Returns the process-style exit code: 0 ok, 1 failed assert, 2 runtime or
// parse error. Never returns from loop/crash.
int run_toy_program(const std::string &source, std::string *output);

} // namespace lsi
