#include "une/cli.hpp"

int main(int argc, char** argv) { return une::cli::run(argc, argv); }
