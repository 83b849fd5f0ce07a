// Acceptance driver: one line per criterion, exit status 1 on any failure.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "gxlab/acceptance.hpp"

int main(int argc, char** argv) {
  gxlab::acceptance::Options opt;
  std::string out = "acceptance_out";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", arg.c_str());
        std::exit(64);
      }
      return argv[++i];
    };
    if (arg == "--out") {
      out = value();
    } else if (arg == "--tolerance-scale") {
      opt.tolerance_scale = std::stod(value());
    } else if (arg == "--threads") {
      opt.threads = std::stoi(value());
    } else if (arg == "--no-determinism") {
      opt.check_determinism = false;
    } else {
      std::fprintf(stderr, "usage: acceptance [--out DIR] [--tolerance-scale S] [--threads N]\n");
      return 64;
    }
  }
  try {
    const auto run = gxlab::acceptance::run_suite(opt, out, [](const auto& r) {
      std::printf("%s\n", gxlab::acceptance::format_line(r).c_str());
      std::fflush(stdout);
    });
    const bool ok = run.all_passed();
    std::printf("%s: %zu criteria, outputs in %s\n", ok ? "ALL PASSED" : "FAILED", run.results.size(), out.c_str());
    return ok ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance: %s\n", e.what());
    return 3;
  }
}
