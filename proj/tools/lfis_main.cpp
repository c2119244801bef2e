#include "lfis/cli.hpp"

int main(int argc, char** argv) { return lfis::cli_main(argc, argv); }
