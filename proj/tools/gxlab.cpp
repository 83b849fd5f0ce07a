// gxlab command-line tool.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "gxlab/cli.hpp"

int main(int argc, char** argv) {
  using namespace gxlab::cli;
  CLI::App app{"gxlab: G-expectation and G-BSDE numerical lab", "gxlab"};
  app.set_version_flag("--version", gxlab::io::kToolVersion);
  app.require_subcommand(1);

  Common common;
  std::string config, out;
  auto add = [&](const char* name, const char* help, bool needs_config) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto* opt = sub->add_option("--config", config, "JSON config file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (created if missing)")->default_str("gxlab_out");
    sub->add_option("--seed", common.seed, "seed for sampled grids")->default_val(0);
    sub->add_option("--threads", common.threads, "worker threads (default: GXLAB_THREADS or 1)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--tolerance-scale", common.tolerance_scale, "multiply every tolerance")
        ->check(CLI::PositiveNumber);
    return sub;
  };
  auto* heat = add("heat", "solve the G-heat equation", true);
  auto* bsde = add("bsde", "solve a Markovian G-BSDE and extract K", true);
  auto* repr = add("repr", "small-time slope against the generator formula", true);
  auto* props = add("props", "check generator identities and the converse gap", true);
  auto* oracle = add("oracle", "lattice oracle against the G-heat PDE", true);
  auto* accept = add("acceptance", "run the acceptance suite", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return usage;
  }

  common.config = config;
  if (!out.empty()) common.out = out;
  return guarded([&] {
    if (heat->parsed()) return cmd_heat(common);
    if (bsde->parsed()) return cmd_bsde(common);
    if (repr->parsed()) return cmd_repr(common);
    if (props->parsed()) return cmd_props(common);
    if (oracle->parsed()) return cmd_oracle(common);
    if (accept->parsed()) return cmd_acceptance(common);
    std::cerr << app.help();
    return static_cast<int>(usage);
  });
}
