#include "morphkit/cli.hpp"

int main(int argc, char** argv) { return morphkit::cli::run(argc, argv); }
