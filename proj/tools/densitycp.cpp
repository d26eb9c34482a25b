#include "densitycp/commands.hpp"

int main(int argc, char** argv) { return densitycp::run_cli(argc, argv); }
