#include "fluxlab/cli.hpp"

int main(int argc, char** argv) { return fluxlab::cli::main(argc, argv); }
