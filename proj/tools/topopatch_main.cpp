#include "topopatch/cli.hpp"

int main(int argc, char** argv) { return topopatch::run_cli(argc, argv); }
