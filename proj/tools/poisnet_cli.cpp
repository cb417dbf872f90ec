#include "poisnet/cli.hpp"

int main(int argc, char** argv) { return poisnet::cli::run(argc, argv); }
