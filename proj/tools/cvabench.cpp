#include <csignal>
#include <iostream>

#include "cvabench/cli.hpp"

namespace {

extern "C" void on_interrupt(int) {
  static int count = 0;
  if (++count > 1) std::_Exit(130);
  cvabench::cli::interrupt_token().cancel();
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  std::vector<std::string> args(argv, argv + argc);
  return cvabench::cli::run_cli(args, std::cout, std::cerr);
}
