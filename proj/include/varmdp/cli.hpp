// Command-line front end. Exit codes: 0 success, 1 runtime error,
// 2 usage/config error.
#pragma once

namespace varmdp {

int cli_main(int argc, const char* const* argv);

} // namespace varmdp
