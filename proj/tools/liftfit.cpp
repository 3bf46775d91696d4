#include "liftfit/cli.hpp"

int main(int argc, char** argv)
{
    return liftfit::run_cli(argc, argv);
}
