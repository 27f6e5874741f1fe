#include "cssmooth_cli/cli.hpp"

int main(int argc, char** argv) { return cssmooth::cli::run(argc, argv); }
