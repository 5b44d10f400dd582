#include "pclmatch/cli.hpp"

int main(int argc, char** argv) { return pclmatch::run_cli(argc, argv); }
