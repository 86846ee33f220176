#include "vanishcost/cli.hpp"

int main(int argc, char** argv) { return vanishcost::cli::run_command(argc, argv); }
