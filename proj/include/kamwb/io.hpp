#pragma once

#include "kamwb/approx.hpp"
#include "kamwb/kam.hpp"
#include "kamwb/lattice.hpp"
#include "kamwb/oscillator.hpp"
#include "kamwb/resonance.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace kamwb {

using json = nlohmann::json;

/// Parses a JSON file. Throws ConfigError with line and column on malformed input.
json load_config(const std::string& path);
json parse_config(const std::string& text, const std::string& origin = "<string>");

/// FNV-1a of the canonical dump, as 16 hex digits.
std::string config_hash(const json& config);

/// "# kamwb <version>", "# seed <seed>", "# config <hash>" lines.
std::string output_header(const json& config, std::uint64_t seed);

/// Writes path.tmp and renames it over path.
void write_atomic(const std::string& path, const std::string& content);

/// Shortest round-trip decimal form.
std::string fmt(double x);

/// Helpers for building CSV text.
class CsvWriter {
public:
    CsvWriter(const json& config, std::uint64_t seed, const std::vector<std::string>& columns);
    CsvWriter& row(const std::vector<double>& values);
    CsvWriter& row_text(const std::vector<std::string>& values);
    const std::string& str() const { return text_; }
    void save(const std::string& path) const { write_atomic(path, text_); }

private:
    std::string text_;
    std::size_t ncol_;
};

// config sections; every parser validates and throws ConfigError

SpatialStructure structure_from_json(const json& j);
Frequency frequency_from_json(const json& j);
ApproxFunction delta_from_json(const json& j);
SequenceSchedule sequence_from_json(const json& j);
/// schedule constants with optional overrides
KamSchedule schedule_from_json(const json& j);
ScanCaps caps_from_json(const json& j);
FrequencyBox box_from_json(const json& j);
ForcingSpec forcing_from_json(const json& j);
HamiltonianOptions hamiltonian_options_from_json(const json& j);
SimOptions sim_options_from_json(const json& j);
ActionAngleChart chart_from_json(const json& cfg);
double rho0_from_json(const json& cfg);

} // namespace kamwb
