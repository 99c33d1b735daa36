#include "sixdgs/cli.hpp"

int main(int argc, char** argv) { return sixdgs::cli::main(argc, argv); }
