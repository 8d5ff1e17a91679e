#include "omrsc/cli.hpp"

int main(int argc, char** argv) { return omrsc::cli::run(argc, argv); }
