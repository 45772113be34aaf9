#include "tacnn/cli/dispatch.hpp"

int main(int argc, char** argv) { return tacnn::run_cli(argc, argv); }
