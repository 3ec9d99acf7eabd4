#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  hybridfilt::cli::configure_logging();
  return hybridfilt::cli::dispatch({argv + 1, argv + argc}, std::cout, std::cerr);
}
