#include "maker/harness.hpp"

int main(int argc, char** argv) { return maker::harness::cli(argc, argv); }
