#include "recourse/cli.hpp"

int main(int argc, char** argv) { return recourse::cli::main(argc, argv); }
