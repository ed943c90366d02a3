#include "tridomain/cli.hpp"

int main(int argc, char** argv) { return tridomain::run_cli(argc, argv); }
