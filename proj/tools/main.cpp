#include "commands.hpp"

int main(int argc, char** argv) { return irwbc::cli::cli_main(argc, argv); }
