#pragma once

// key=value run configuration. '#' starts a comment; unknown keys are an
// error.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pmest/augmentation.hpp"
#include "pmest/shrinkage.hpp"
#include "pmest/synth.hpp"

namespace pmest {

class RunConfig {
 public:
  static const std::vector<std::string>& known_keys();

  /// `source` names the input in error messages.
  static RunConfig parse(std::istream& in, const std::string& source = "config");
  static RunConfig from_file(const std::string& path);

  /// Throws ConfigError for an unknown key or a "key=value" without '='.
  void set(const std::string& key, const std::string& value);
  void set_assignment(const std::string& assignment);
  /// Record an automatically chosen value next to its key in the echo.
  void annotate(const std::string& key, const std::string& note);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;

  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  long integer(const std::string& key) const;
  long integer_or(const std::string& key, long fallback) const;
  std::vector<double> number_list(const std::string& key) const;

  /// Sorted "key=value" lines with annotations as trailing comments.
  std::vector<std::string> echo() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> notes_;
};

/// "logspace:a:b:k", "linspace:a:b:k" or a comma list.
std::vector<double> parse_grid(const std::string& text);

/// sigma.kind = identity | scaled | ar1 | spectrum | spiked with sigma.dim,
/// sigma.variance, sigma.r, sigma.values, sigma.bulk, sigma.spikes, sigma.seed.
SigmaSpec sigma_spec_from(const RunConfig& cfg);

/// eta = auto or a positive number.
EtaPolicy eta_policy_from(const RunConfig& cfg);

/// scheme.kind = fixed_gaussian_gda | fixed_gaussian_tda | random_mask_tda |
/// salt_pepper_tda | gaussian_mixture_gda. The mixture is fitted to `x` with
/// scheme.components components.
DaScheme scheme_from(const RunConfig& cfg, const SampleMatrix& x, std::uint64_t seed);

}  // namespace pmest
