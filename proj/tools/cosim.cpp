#include "cosim/runner.hpp"

int main(int argc, char** argv) { return cosim::cli_main(argc, argv); }
