#include "mmpr/cli.hpp"

int main(int argc, char** argv) {
    return mmpr::run_cli(argc, argv);
}
