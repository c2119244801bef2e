#pragma once

namespace lfis {

// Entry point for the `lfis` command-line tool (build / run / compare).
int cli_main(int argc, const char* const* argv);

} // namespace lfis
