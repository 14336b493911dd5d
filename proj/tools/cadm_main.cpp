#include "cadm/cli.hpp"

int main(int argc, char** argv) { return cadm::run_cli(argc, argv); }
