#include "cli.hpp"

int main(int argc, char **argv) { return newcast::cli::run(argc, argv); }
