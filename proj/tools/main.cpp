#include "adaptivity/harness.hpp"

int main(int argc, char** argv) { return adaptivity::cli_main(argc, argv); }
