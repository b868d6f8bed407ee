#include "latomo/cli.hpp"

int main(int argc, char** argv) { return latomo::cli::run(argc, argv); }
