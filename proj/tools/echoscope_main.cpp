// echoscope_main.cpp

#include "echoscope/cli.hpp"

int main(int argc, char** argv) {
    return echoscope::cli::run(argc, argv);
}
