#include "dbne/cli.hpp"

int main(int argc, char** argv) { return dbne::cli::run(argc, argv); }
