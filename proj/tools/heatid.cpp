// Command-line front end: heatid <mode> --config <file> [--key value ...]
#include <cstring>
#include <iostream>

#include "config.hpp"
#include "heatid/version.hpp"
#include "modes.hpp"

namespace {

void usage(std::ostream& os) {
  os << "heatid " << HEATID_VERSION << "\n"
     << "usage: heatid <mode> --config <file> [--key value ...]\n"
     << "modes: forward phantom invert adjoint-test convergence-test sweep witness\n"
     << "keys:\n";
  for (const auto& k : heatid::cli::known_keys())
    os << "  " << k.name << " (" << k.kind << "): " << k.help << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2 || !std::strcmp(argv[1], "--help") || !std::strcmp(argv[1], "-h")) {
    usage(argc < 2 ? std::cerr : std::cout);
    return argc < 2 ? heatid::cli::kExitError : heatid::cli::kExitPass;
  }
  try {
    const auto rc = heatid::cli::parse_command_line(argc, argv);
    return heatid::cli::run(rc, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "heatid: " << e.what() << "\n";
    return heatid::cli::kExitError;
  }
}
