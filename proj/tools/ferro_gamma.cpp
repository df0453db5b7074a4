#include "ferro/cli.hpp"

int main(int argc, char** argv)
{
    return ferro::cli_main(argc, argv);
}
