#include "icebench/cli.hpp"

int main(int argc, char** argv) { return icebench::cli_main(argc, argv); }
