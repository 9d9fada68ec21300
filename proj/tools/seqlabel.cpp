#include "seqlabel/cli.hpp"

int main(int argc, char** argv) { return seqlabel::cli_main(argc, argv); }
