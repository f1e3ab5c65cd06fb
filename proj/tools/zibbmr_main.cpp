#include "zibbmr/cli.hpp"

int main(int argc, char** argv) { return zibbmr::cli::run(argc, argv); }
