#include "ckrl_cli.hpp"

int main(int argc, char** argv) { return ckrl::cli::run(argc, argv); }
