#include "condsub/cli.hpp"

int main(int argc, char** argv) { return condsub::cli::run(argc, argv); }
