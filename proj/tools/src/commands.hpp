#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <CLI11.hpp>

namespace seje::cli {

using Action = std::function<void()>;

// Adds every subcommand to `app`. The action paired with a subcommand runs
// after a successful parse when that subcommand was selected.
std::vector<std::pair<CLI::App*, Action>> register_commands(CLI::App& app);

// Fills options not given on the command line from the file named by the
// subcommand's --config. Keys may use '_' or '-'; unknown keys are an error.
void apply_config(CLI::App* sub);

}  // namespace seje::cli
