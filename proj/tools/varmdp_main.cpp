#include "varmdp/cli.hpp"

int main(int argc, char** argv) { return varmdp::cli_main(argc, argv); }
