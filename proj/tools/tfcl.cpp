#include <string>
#include <vector>

#include "tfcl/cli/app.hpp"

int main(int argc, char** argv) {
    return tfcl::cli::run_main(std::vector<std::string>(argv, argv + argc));
}
