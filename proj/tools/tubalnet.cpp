#include "tubalnet/cli.hpp"

int main(int argc, char** argv) { return tubalnet::cli::run(argc, argv); }
