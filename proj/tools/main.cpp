#include <csignal>
#include <iostream>

#include "ccvqa/cli.hpp"

namespace {

void on_interrupt(int) { ccvqa::app::interrupt_flag().store(true); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_interrupt);
  return ccvqa::app::run_cli(argc, argv, std::cout, std::cerr);
}
