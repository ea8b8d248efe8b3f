#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace alpine {

// Entry point shared by the binary and the tests. args excludes argv[0].
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace alpine
