#pragma once

#include <CLI11.hpp>

namespace kamwb::cli {

/// Registers every subcommand on the app.
void register_commands(CLI::App& app);

} // namespace kamwb::cli
