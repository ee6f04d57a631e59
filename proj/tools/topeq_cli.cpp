#include "topeq/cli/cli.hpp"

int main(int argc, char** argv) { return topeq::cli::run(argc, argv); }
