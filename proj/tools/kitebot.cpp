#include "kitebot/cli.hpp"

int main(int argc, char** argv) { return kitebot::run_cli(argc, argv); }
