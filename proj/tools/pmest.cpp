#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "pmest/commands.hpp"
#include "pmest/parallel.hpp"

int main(int argc, char** argv) {
  if (const char* env = std::getenv("PMEST_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t > 0) pmest::set_num_threads(t);
    } catch (const std::exception&) {
      std::cerr << "pmest: ignoring PMEST_THREADS='" << env << "'\n";
    }
  }
  std::vector<std::string> args(argv + 1, argv + argc);
  return pmest::run_command(args, std::cout, std::cerr);
}
