#include "m3l/cli.hpp"

int main(int argc, char** argv) { return m3l::cli::run(argc, argv); }
