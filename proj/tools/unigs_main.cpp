#include "unigs/cli.hpp"

int main(int argc, char** argv) { return unigs::cli::run(argc, argv); }
