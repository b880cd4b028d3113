#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dsheat/lattice.hpp"
#include "dsheat/noise.hpp"
#include "dsheat/sigma.hpp"
#include "dsheat/walk_kernel.hpp"

namespace dsheat::cli {

using json = nlohmann::json;

enum ExitCode { kSuccess = 0, kVerificationFailed = 1, kConfigError = 2 };

/// Invalid configuration. `line` is the 1-based line in the config file the
/// problem traces back to, or 0 when the value came from a default or an
/// override.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// The configuration `verify` runs with when no file is given.
json default_config();

/// Defaults, then the file (if any), then overrides in command-line order.
/// Each override is a dotted key and a JSON value ("kernel.stay", "0.9").
/// Execution settings (workers, output_dir) are kept out of the result.
struct Resolved {
  json config;
  std::string source_text;  ///< raw config file, for line references
  std::optional<int> workers;
  std::optional<std::string> output_dir;
};
Resolved resolve_config(const std::optional<std::string>& path,
                        const std::vector<std::pair<std::string, std::string>>& overrides);

WalkKernel kernel_from(const json& spec);
SigmaSpec sigma_from(const json& spec);
NoiseModel noise_from(const json& spec);
LatticeField initial_from(const json& spec, int dim);

/// `simple1`, `simple2`, `lazy1:0.5`, ... as a kernel JSON object.
json kernel_shorthand(const std::string& s);

/// %.17g
std::string format_double(double v);

/// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dsheat::cli
