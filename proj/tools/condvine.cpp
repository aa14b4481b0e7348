#include "cli/commands.hpp"

int main(int argc, char** argv) { return condvine::cli::run_cli({argv + 1, argv + argc}); }
