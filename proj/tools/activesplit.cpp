#include <activesplit/cli.hpp>

int main(int argc, char** argv) { return activesplit::cli::run_cli(argc, argv); }
