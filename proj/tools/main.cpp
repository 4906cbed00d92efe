#include "cli.hpp"

int main(int argc, char** argv) { return memfem::run_cli(argc, argv); }
