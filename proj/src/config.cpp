#include "pmest/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>

#include "pmest/harness.hpp"

namespace pmest {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_number(const std::string& key, const std::string& text) {
  std::string_view t = text;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw ConfigError("config: '" + key + "' expects a number, got '" + text + "'");
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item = trim(text.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(to_number(key, item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("config: '" + key + "' is an empty list");
  return out;
}

}  // namespace

const std::vector<std::string>& RunConfig::known_keys() {
  static const std::vector<std::string> keys = {
      "data",          "full_data",       "output",       "n",
      "m",             "seed",            "mode",         "lambda",
      "lambda_grid",   "alpha_grid",      "eta",          "k_mc",
      "refine",        "loo",             "suite",        "sigma.kind",
      "sigma.dim",     "sigma.variance",  "sigma.r",      "sigma.values",
      "sigma.bulk",    "sigma.spikes",    "sigma.seed",   "noise.dist",
      "scheme.kind",   "scheme.variance", "scheme.keep_prob", "scheme.noise_var",
      "scheme.components", "scheme.iters",
  };
  return keys;
}

RunConfig RunConfig::parse(std::istream& in, const std::string& source) {
  RunConfig cfg;
  std::string line;
  long row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(row) + ": expected key=value");
    const std::string key = trim(body.substr(0, eq));
    if (cfg.has(key)) throw ConfigError(source + ":" + std::to_string(row) + ": duplicate key '" + key + "'");
    try {
      cfg.set(key, trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(row) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse(in, path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  if (value.empty()) throw ConfigError("config key '" + key + "' has an empty value");
  values_[key] = value;
  notes_.erase(key);
}

void RunConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::annotate(const std::string& key, const std::string& note) { notes_[key] = note; }

std::optional<std::string> RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string RunConfig::get_or(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::string RunConfig::require(const std::string& key) const {
  auto v = get(key);
  if (!v) throw ConfigError("missing required config key '" + key + "'");
  return *v;
}

double RunConfig::number(const std::string& key) const { return to_number(key, require(key)); }

double RunConfig::number_or(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long RunConfig::integer(const std::string& key) const {
  const double v = number(key);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError("config: '" + key + "' expects an integer");
  return static_cast<long>(v);
}

long RunConfig::integer_or(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

std::vector<double> RunConfig::number_list(const std::string& key) const { return to_list(key, require(key)); }

std::vector<std::string> RunConfig::echo() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    std::string line = k + "=" + v;
    const auto it = notes_.find(k);
    if (it != notes_.end()) line += "  # " + it->second;
    out.push_back(line);
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  const bool log = text.rfind("logspace:", 0) == 0;
  const bool lin = text.rfind("linspace:", 0) == 0;
  if (!log && !lin) {
    auto g = to_list("grid", text);
    std::sort(g.begin(), g.end());
    return g;
  }
  std::vector<std::string> parts;
  std::size_t start = 9;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 3) throw ConfigError("grid: expected logspace:a:b:k or linspace:a:b:k");
  const double a = to_number("grid", parts[0]);
  const double b = to_number("grid", parts[1]);
  const double kd = to_number("grid", parts[2]);
  if (kd < 1 || kd != std::floor(kd)) throw ConfigError("grid: point count must be a positive integer");
  const int k = static_cast<int>(kd);
  if (log && !(a > 0.0 && b > 0.0)) throw ConfigError("grid: logspace needs positive end points");
  std::vector<double> g(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double t = k == 1 ? 0.0 : static_cast<double>(i) / (k - 1);
    g[static_cast<std::size_t>(i)] =
        log ? std::exp(std::log(a) + t * (std::log(b) - std::log(a))) : a + t * (b - a);
  }
  std::sort(g.begin(), g.end());
  return g;
}

SigmaSpec sigma_spec_from(const RunConfig& cfg) {
  const std::string kind = cfg.require("sigma.kind");
  SigmaSpec spec;
  const long dim = cfg.integer("sigma.dim");
  if (dim < 1) throw ConfigError("sigma.dim must be >= 1");
  spec.dim = dim;
  const auto seed = static_cast<std::uint64_t>(cfg.integer_or("sigma.seed", 0));
  if (kind == "identity")
    spec.kind = sigma::Identity{};
  else if (kind == "scaled")
    spec.kind = sigma::Scaled{cfg.number("sigma.variance")};
  else if (kind == "ar1")
    spec.kind = sigma::Ar1{cfg.number("sigma.r")};
  else if (kind == "spectrum")
    spec.kind = sigma::Spectrum{cfg.number_list("sigma.values"), seed};
  else if (kind == "spiked")
    spec.kind = sigma::Spiked{cfg.number("sigma.bulk"), cfg.number_list("sigma.spikes"), seed};
  else
    throw ConfigError("unknown sigma.kind '" + kind + "'");
  return spec;
}

EtaPolicy eta_policy_from(const RunConfig& cfg) {
  const std::string v = cfg.get_or("eta", "auto");
  if (v == "auto") return EtaPolicy::automatic();
  const double eta = to_number("eta", v);
  if (!(eta > 0.0)) throw ConfigError("eta must be positive or 'auto'");
  return EtaPolicy::fixed(eta);
}

DaScheme scheme_from(const RunConfig& cfg, const SampleMatrix& x, std::uint64_t seed) {
  const std::string kind = cfg.require("scheme.kind");
  const Index d = x.dim();
  auto build = [&]() -> DaScheme {
    if (kind == "fixed_gaussian_gda")
      return scheme::FixedGaussianGda{SpdMatrix::scaled_identity(d, cfg.number("scheme.variance"))};
    if (kind == "fixed_gaussian_tda")
      return scheme::FixedGaussianTda{SpdMatrix::scaled_identity(d, cfg.number("scheme.variance"))};
    if (kind == "random_mask_tda") return scheme::RandomMaskTda{cfg.number("scheme.keep_prob")};
    if (kind == "salt_pepper_tda")
      return scheme::SaltPepperTda{cfg.number("scheme.keep_prob"), cfg.number("scheme.noise_var")};
    if (kind == "gaussian_mixture_gda") {
      const long k = cfg.integer("scheme.components");
      const int iters = static_cast<int>(cfg.integer_or("scheme.iters", 200));
      MixtureFit fit = fit_mixture(x, k, RngStream{seed, 0x6d6978}, iters);
      if (cfg.has("scheme.variance")) {
        const double v = cfg.number("scheme.variance");
        for (auto& c : fit.mixture.covariances) c = SpdMatrix::scaled_identity(d, v);
      }
      return std::move(fit.mixture);
    }
    throw ConfigError("unknown scheme.kind '" + kind + "'");
  };
  const DaScheme s = build();
  try {
    validate_scheme(s, d);
  } catch (const InvalidScheme& e) {
    throw ConfigError(e.what());
  }
  return s;
}

}  // namespace pmest
