#include <string>
#include <vector>

#include <qbd/cli.hpp>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return qbd::run_command(args);
}
