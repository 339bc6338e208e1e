#include "fgray/cli.hpp"

int main(int argc, char** argv)
{
    return fgray::dispatch(argc, argv);
}
