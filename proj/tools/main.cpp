#include "dualcast/cli.hpp"

int main(int argc, char** argv) { return dualcast::cli_main(argc, argv); }
