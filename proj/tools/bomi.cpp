#include "bomi/cli/commands.hpp"

int main(int argc, char** argv) { return bomi::cli::Main(argc, argv); }
