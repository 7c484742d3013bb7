#pragma once

#include <iosfwd>

namespace pathweight {

// Exit status: 0 success, 1 configuration or I/O error, 2 numerical failure.
int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace pathweight
