#include "mxw/cli.hpp"

int main(int argc, char** argv) { return mxw::cli_main(argc, argv); }
