#include <iostream>

#include <CLI11.hpp>

#include "dbar/commands.hpp"

int main(int argc, char** argv) {
  using dbar::commands::CommandOptions;
  CLI::App app{"D-bar EIT reconstruction: simulate, reconstruct, evaluate"};
  app.set_version_flag("--version", DBAR_VERSION);
  app.require_subcommand(1);

  CommandOptions o;
  std::string method, mode;
  std::uint64_t seed = 0;
  int threads = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON or key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", seed, "Random seed (noise, electrode perturbation)");
    sub->add_option("--threads", threads, "OpenMP threads for per-pixel solves (0 = default)");
  };

  auto* simulate = app.add_subcommand("simulate", "Simulate a dataset and its truth image from a scenario config");
  common(simulate);

  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct an admittivity image from a dataset");
  common(reconstruct);
  reconstruct->add_option("--dataset", o.dataset, "Dataset JSON")->check(CLI::ExistingFile);
  reconstruct->add_option("--reference", o.reference, "Reference dataset JSON (difference mode)")
      ->check(CLI::ExistingFile);
  reconstruct->add_option("--method", method, "texp | approach1 | approach2");
  reconstruct->add_option("--mode", mode, "absolute | difference");

  auto* evaluate = app.add_subcommand("evaluate", "Regional statistics, dynamic range and rotation of an image");
  common(evaluate);
  evaluate->add_option("--image", o.image, "Image metadata JSON")->check(CLI::ExistingFile);
  evaluate->add_option("--truth", o.truth, "Truth image metadata JSON")->check(CLI::ExistingFile);
  evaluate->add_option("--compare", o.compare, "Reference image for the rotation estimate")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--threads")) o.threads = threads;
  if (sub == reconstruct) {
    if (reconstruct->count("--method")) o.method = method;
    if (reconstruct->count("--mode")) o.mode = mode;
  }

  try {
    if (sub == simulate) {
      auto r = dbar::commands::cmd_simulate(o);
      std::cout << "dataset  " << r.dataset.string() << "\ntruth    " << r.truth.string() << "\nmanifest "
                << r.manifest.string() << '\n';
    } else if (sub == reconstruct) {
      auto r = dbar::commands::cmd_reconstruct(o);
      const auto& rec = r.reconstruction;
      std::cout << "image    " << r.image.string() << "\nmanifest " << r.manifest.string() << "\ngamma0   "
                << rec.gamma0.real() << (rec.gamma0.imag() < 0 ? " - " : " + ") << std::abs(rec.gamma0.imag())
                << "i S/m\nfailed   " << rec.field.failures << " pixels\ntime     " << rec.seconds << " s\n";
      if (rec.field.failures > 0)
        std::cerr << "warning: " << rec.field.failures << " pixels did not converge and carry the baseline\n";
    } else {
      auto r = dbar::commands::cmd_evaluate(o);
      std::cout << "report   " << r.report.string() << "\ndynamic range " << r.metrics.dynamic_range << " %\n";
      for (const auto& s : r.metrics.regions)
        std::cout << "  " << s.name << ": avg " << s.re.avg << " max " << s.re.max << " min " << s.re.min << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dbar::commands::exit_code(e);
  }
  return 0;
}
