#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "seje/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Semantics-enhanced recipe/image joint embedding pipeline"};
  app.set_version_flag("--version", SEJE_VERSION);
  app.require_subcommand(1, 1);
  const auto commands = seje::cli::register_commands(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    for (const auto& [sub, action] : commands) {
      if (!sub->parsed()) continue;
      seje::cli::apply_config(sub);
      action();
    }
  } catch (const seje::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
