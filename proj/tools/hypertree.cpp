#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hypertree/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hypertree: tree embedding experiments"};
  app.set_version_flag("--version", std::string(hypertree::kVersion));
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  for (const auto& name : hypertree::suite_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " suite");
    sub->add_option("--spec", spec_path, "spec file (key = value lines)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override the master seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  const std::string suite = app.get_subcommands().front()->get_name();

  std::ifstream in(spec_path);
  if (!in) {
    std::cerr << "cannot read " << spec_path << '\n';
    return 1;
  }
  hypertree::RunOptions opt;
  opt.out = out_dir;
  opt.threads = threads;
  opt.seed = seed;
  const auto rr = hypertree::run(suite, in, opt);
  for (const auto& d : rr.diagnostics) std::cerr << spec_path << ':' << d.str().substr(4) << '\n';
  if (!rr.error.empty()) std::cerr << "error: " << rr.error << '\n';
  for (const auto& c : rr.suite.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  value=" << c.value.dump() << "  threshold=" << c.threshold.dump()
              << '\n';
  return rr.exit_code;
}
