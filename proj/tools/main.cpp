#include "ddqa_cli.hpp"

int main(int argc, char** argv) {
    return ddqa::cli::run(argc, argv);
}
