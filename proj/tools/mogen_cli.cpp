#include "mogen/cli.hpp"

int main(int argc, char** argv) { return mogen::cli::run(argc, argv); }
