#include "cli.hpp"

int main(int argc, char** argv) { return tvpmai::cli::run(argc, argv); }
