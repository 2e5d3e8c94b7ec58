#include "qflow/cli.hpp"

int main(int argc, char** argv) { return qflow::run_cli(argc, argv); }
