#include "leo/commands.hpp"

int main(int argc, char** argv) { return leo::cli_main(argc, argv); }
