// modl_gen: writes the generated fixtures (schema.json plus CSV files).

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "modl/error.hpp"
#include "modl/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"modl_gen: fixture generator", "modl_gen"};
  app.require_subcommand(1);
  std::string out = ".";
  std::uint64_t seed = 1;

  modl::synth::AccidentsOptions acc;
  auto* accidents = app.add_subcommand("accidents", "Accidents snowflake with a planted Min(BirthYear) signal");
  accidents->add_option("--accidents", acc.accidents)->capture_default_str();
  accidents->add_option("--flip", acc.flip, "Label noise probability")->capture_default_str();

  modl::synth::FlatOptions flat;
  auto* flat_cmd = app.add_subcommand("flat", "Root-only wide numerical table");
  flat_cmd->add_option("--rows", flat.rows)->capture_default_str();
  flat_cmd->add_option("--variables", flat.variables)->capture_default_str();

  modl::synth::SizedOptions sized;
  double mb = 10.0;
  auto* sized_cmd = app.add_subcommand("sized", "Root table of a given size in MiB with a small child table");
  sized_cmd->add_option("--mb", mb)->capture_default_str();
  sized_cmd->add_option("--numeric-columns", sized.numeric_columns)->capture_default_str();

  for (auto* sub : {accidents, flat_cmd, sized_cmd}) {
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed)->capture_default_str();
  }
  CLI11_PARSE(app, argc, argv);

  try {
    if (*accidents) {
      acc.seed = seed;
      const auto fx = modl::synth::write_accidents(out, acc);
      std::cout << "accidents: " << fx.rows << " rows, threshold " << fx.threshold << ", bayes_auc "
                << fx.bayes_auc << '\n';
    } else if (*flat_cmd) {
      flat.seed = seed;
      const auto fx = modl::synth::write_flat(out, flat);
      std::cout << "flat: " << fx.rows << " rows\n";
    } else {
      sized.seed = seed;
      sized.bytes = static_cast<std::uint64_t>(mb * 1024 * 1024);
      const auto fx = modl::synth::write_sized(out, sized);
      std::cout << "sized: " << fx.rows << " rows\n";
    }
  } catch (const modl::Error& e) {
    std::cerr << "modl_gen: error[" << modl::category_name(e.category()) << "]: " << e.what() << '\n';
    return e.exit_code();
  }
  return 0;
}
