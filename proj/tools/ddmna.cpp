#include "ddmna/cli.hpp"

int main(int argc, char** argv) { return ddmna::run_cli(argc, argv); }
