#include "qtraj/cli.hpp"

int main(int argc, char** argv) { return qtraj::cli_main(argc, argv); }
