#include "pmest/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "pmest/config.hpp"
#include "pmest/matrix_io.hpp"
#include "pmest/parallel.hpp"
#include "pmest/suites.hpp"

namespace pmest {

namespace {

// Stream ids that tie each command's randomness to the seed alone.
constexpr std::uint64_t kDataStream = 0x64617461;
constexpr std::uint64_t kAugmentStream = 0x61756720;
constexpr std::uint64_t kCurveStream = 0x63757276;

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
  std::string command;
};

struct Dataset {
  SampleMatrix x;
  std::optional<SpdMatrix> sigma;
};

std::uint64_t seed_of(RunConfig& cfg) {
  if (!cfg.has("seed")) cfg.set("seed", "0");
  const long s = cfg.integer("seed");
  if (s < 0) throw ConfigError("seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

NoiseSpec noise_of(RunConfig& cfg) {
  if (!cfg.has("noise.dist")) cfg.set("noise.dist", "gaussian");
  try {
    return {parse_noise_dist(cfg.require("noise.dist"))};
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

SpdMatrix sigma_of(RunConfig& cfg) {
  try {
    return build_sigma(sigma_spec_from(cfg));
  } catch (const InvalidSpec& e) {
    throw ConfigError(e.what());
  }
}

Dataset load_data(RunConfig& cfg) {
  const std::uint64_t seed = seed_of(cfg);
  std::optional<SpdMatrix> sigma;
  if (cfg.has("sigma.kind")) sigma = sigma_of(cfg);
  if (auto path = cfg.get("data")) {
    SampleMatrix x = load_matrix(*path);
    if (sigma && sigma->dim() != x.dim())
      throw ConfigError("sigma.dim " + std::to_string(sigma->dim()) + " differs from data dimension " +
                        std::to_string(x.dim()));
    return {std::move(x), sigma};
  }
  if (!sigma) throw ConfigError("need either data=PATH or sigma.* keys to generate data");
  const long n = cfg.integer("n");
  if (n < 1) throw ConfigError("n must be >= 1");
  const NoiseSpec noise = noise_of(cfg);
  return {sample_data(*sigma, n, noise, RngStream{seed, kDataStream}), sigma};
}

CurveOptions curve_options(RunConfig& cfg, const Dataset& data) {
  CurveOptions co;
  co.eta = eta_policy_from(cfg);
  if (!co.eta.value) {
    if (!cfg.has("eta")) cfg.set("eta", "auto");
    const auto chosen = default_eta(data.x);
    cfg.annotate("eta", chosen ? "resolved " + format_double(*chosen) : "undefined for d >= n, indicator off");
  }
  co.sigma = data.sigma;
  if (!cfg.has("mode")) cfg.set("mode", "relative");
  const std::string mode = cfg.require("mode");
  if (mode == "oracle") {
    if (!data.sigma) throw ConfigError("mode=oracle needs sigma.* keys");
    co.oracle_constant = true;
  } else if (mode != "relative") {
    throw ConfigError("mode must be 'relative' or 'oracle'");
  }
  if (auto path = cfg.get("full_data")) {
    const SampleMatrix full = load_matrix(*path);
    if (full.dim() != data.x.dim()) throw ConfigError("full_data dimension differs from data");
    co.full_covariance = sample_covariance(full);
  }
  return co;
}

DilationOptions dilation_of(RunConfig& cfg) {
  if (!cfg.has("loo")) cfg.set("loo", "all_columns");
  const std::string v = cfg.require("loo");
  if (v == "all_columns") return {LooQuadratic::all_columns};
  if (v == "first_column") return {LooQuadratic::first_column};
  throw ConfigError("loo must be 'all_columns' or 'first_column'");
}

Index k_mc_of(RunConfig& cfg) {
  if (!cfg.has("k_mc")) cfg.set("k_mc", "64");
  const long k = cfg.integer("k_mc");
  if (k < 1) throw ConfigError("k_mc must be >= 1");
  return k;
}

double lambda_of(const RunConfig& cfg) {
  const double l = cfg.number("lambda");
  if (!(l >= 0.0)) throw ConfigError("lambda must be >= 0");
  return l;
}

void write_sidecar(const std::string& path, const RunConfig& cfg, const std::string& command) {
  std::ofstream side(path + ".config");
  if (!side) throw ConfigError("cannot write '" + path + ".config'");
  side << "# pmest " << command << "\n";
  for (const auto& line : cfg.echo()) side << line << "\n";
}

std::vector<std::string> echo_with_header(const RunConfig& cfg, const std::string& command) {
  std::vector<std::string> lines = {"pmest " + command};
  for (const auto& l : cfg.echo()) lines.push_back(l);
  return lines;
}

// Writes through `writer` to the configured output file, or to ctx.out.
void emit(Context& ctx, const std::function<void(std::ostream&)>& writer, bool binary = false) {
  if (auto path = ctx.cfg.get("output")) {
    std::ofstream f(*path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw ConfigError("cannot write '" + *path + "'");
    writer(f);
    write_sidecar(*path, ctx.cfg, ctx.command);
  } else {
    writer(ctx.out);
  }
}

void emit_matrix(Context& ctx, const Eigen::MatrixXd& m) {
  if (auto path = ctx.cfg.get("output")) {
    save_matrix(*path, m);
    write_sidecar(*path, ctx.cfg, ctx.command);
  } else {
    write_csv(ctx.out, m);
  }
}

std::string sigma_path_for(const std::string& output) {
  const auto slash = output.find_last_of('/');
  const auto dot = output.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return output + ".sigma";
  return output.substr(0, dot) + ".sigma" + output.substr(dot);
}

// ---------------------------------------------------------------------------

int cmd_gen(Context& ctx) {
  if (ctx.cfg.has("data")) throw ConfigError("gen writes synthetic data; drop the data key");
  const std::string output = ctx.cfg.require("output");
  const Dataset data = load_data(ctx.cfg);
  save_matrix(output, data.x.data());
  save_matrix(sigma_path_for(output), data.sigma->data());
  write_sidecar(output, ctx.cfg, ctx.command);
  ctx.err << "gen: wrote " << data.x.dim() << " x " << data.x.samples() << " samples to " << output << "\n";
  return kExitOk;
}

int cmd_estimate(Context& ctx) {
  const Dataset data = load_data(ctx.cfg);
  const double lambda = lambda_of(ctx.cfg);
  if (ctx.cfg.has("scheme.kind")) {
    const std::uint64_t seed = seed_of(ctx.cfg);
    const DaScheme s = scheme_from(ctx.cfg, data.x, seed);
    const long m = ctx.cfg.integer("m");
    if (m < 0) throw ConfigError("m must be >= 0");
    const SampleMatrix g = sample_augmented(s, data.x, m, RngStream{seed, kAugmentStream});
    emit_matrix(ctx, augmented_precision(data.x, g, lambda).data());
  } else {
    emit_matrix(ctx, shrinkage_precision(data.x, lambda).data());
  }
  return kExitOk;
}

int cmd_augment(Context& ctx) {
  const Dataset data = load_data(ctx.cfg);
  const std::uint64_t seed = seed_of(ctx.cfg);
  const DaScheme s = scheme_from(ctx.cfg, data.x, seed);
  const long m = ctx.cfg.integer("m");
  if (m < 1) throw ConfigError("augment needs m >= 1");
  emit_matrix(ctx, sample_augmented(s, data.x, m, RngStream{seed, kAugmentStream}).data());
  return kExitOk;
}

ErrorCurve run_lambda_curve(Context& ctx, const Dataset& data, const CurveOptions& co) {
  return lambda_curve(data.x, parse_grid(ctx.cfg.require("lambda_grid")), co);
}

ErrorCurve run_alpha_curve(Context& ctx, const Dataset& data, const CurveOptions& co) {
  const std::uint64_t seed = seed_of(ctx.cfg);
  const DaScheme s = scheme_from(ctx.cfg, data.x, seed);
  const double lambda = lambda_of(ctx.cfg);
  const auto alphas = parse_grid(ctx.cfg.require("alpha_grid"));
  for (double a : alphas)
    if (!(a >= 0.0 && a < 1.0)) throw ConfigError("alpha_grid values must lie in [0, 1)");
  const Index k_mc = k_mc_of(ctx.cfg);
  const DilationOptions dil = dilation_of(ctx.cfg);
  return alpha_curve(data.x, s, lambda, alphas, co, k_mc, RngStream{seed, kCurveStream}, dil);
}

int cmd_curve(Context& ctx, bool alpha) {
  const Dataset data = load_data(ctx.cfg);
  const CurveOptions co = curve_options(ctx.cfg, data);
  const ErrorCurve c = alpha ? run_alpha_curve(ctx, data, co) : run_lambda_curve(ctx, data, co);
  const auto echo = echo_with_header(ctx.cfg, ctx.command);
  emit(ctx, [&](std::ostream& os) { write_curve_csv(os, c, echo); });
  return kExitOk;
}

int cmd_tune(Context& ctx) {
  const Dataset data = load_data(ctx.cfg);
  const CurveOptions co = curve_options(ctx.cfg, data);
  const bool alpha = ctx.cfg.has("alpha_grid");
  TuneResult t;
  if (alpha) {
    const ErrorCurve c = run_alpha_curve(ctx, data, co);
    if (!c.argmin_estimate) throw NoConvergence("tune: no grid point produced an estimate");
    t.curve = c;
    t.best = c.points[*c.argmin_estimate].hyperparam;
    t.best_value = *c.points[*c.argmin_estimate].estimate;
  } else {
    if (!ctx.cfg.has("refine")) ctx.cfg.set("refine", "true");
    const std::string refine = ctx.cfg.require("refine");
    if (refine != "true" && refine != "false") throw ConfigError("refine must be 'true' or 'false'");
    t = tune_lambda(data.x, parse_grid(ctx.cfg.require("lambda_grid")), co, refine == "true");
  }
  if (alpha)
    ctx.out << "alpha*=" << format_double(t.best)
            << " m*=" << t.curve.points[*t.curve.argmin_estimate].m << " estimate=" << format_double(t.best_value)
            << "\n";
  else
    ctx.out << "lambda*=" << format_double(t.best) << " estimate=" << format_double(t.best_value)
            << (t.refined ? " refined" : "") << "\n";
  if (auto path = ctx.cfg.get("output")) {
    const auto echo = echo_with_header(ctx.cfg, ctx.command);
    std::ofstream f(*path);
    if (!f) throw ConfigError("cannot write '" + *path + "'");
    write_curve_csv(f, t.curve, echo);
    write_sidecar(*path, ctx.cfg, ctx.command);
  }
  return kExitOk;
}

int cmd_validate(Context& ctx, const std::string& suite_flag) {
  if (!suite_flag.empty()) ctx.cfg.set("suite", suite_flag);
  if (!ctx.cfg.has("suite")) ctx.cfg.set("suite", "all");
  SuiteOptions opt;
  if (ctx.cfg.has("seed")) opt.seed = seed_of(ctx.cfg);
  ctx.cfg.set("seed", std::to_string(opt.seed));
  const std::string suite = ctx.cfg.require("suite");
  std::vector<std::string> names = suite == "all" ? suite_names() : std::vector<std::string>{suite};
  for (const auto& n : names)
    if (std::find(suite_names().begin(), suite_names().end(), n) == suite_names().end())
      throw ConfigError("unknown suite '" + n + "'");

  std::vector<ExperimentReport> reports;
  for (const auto& n : names)
    for (auto& r : run_suite(n, opt)) reports.push_back(std::move(r));

  bool all_passed = true;
  for (const auto& r : reports)
    for (const auto& c : r.checks) {
      all_passed = all_passed && c.passed;
      ctx.err << (c.passed ? "[PASS] " : "[FAIL] ") << r.name << "." << c.name << ": " << format_double(c.value)
              << " " << c.comparison << " " << format_double(c.threshold) << "\n";
    }
  emit(ctx, [&](std::ostream& os) {
    nlohmann::json echo = nlohmann::json::object();
    for (const auto& line : ctx.cfg.echo()) {
      const auto eq = line.find('=');
      echo[line.substr(0, eq)] = line.substr(eq + 1);
    }
    os << nlohmann::json{{"command", "validate"}, {"config", echo}}.dump() << "\n";
    for (const auto& r : reports) os << r.to_json().dump() << "\n";
  });
  return all_passed ? kExitOk : kExitToleranceFailure;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

}  // namespace

void write_curve_csv(std::ostream& out, const ErrorCurve& curve, const std::vector<std::string>& echo) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  auto arg = [&](const std::optional<std::size_t>& i) {
    return i ? format_double(curve.points[*i].hyperparam) : std::string("none");
  };
  std::ostringstream s;
  for (const auto& line : echo) s << "# " << line << "\n";
  s << "# axis=" << to_string(curve.axis) << " argmin_estimate=" << arg(curve.argmin_estimate)
    << " argmin_oracle=" << arg(curve.argmin_oracle) << " argmin_proxy=" << arg(curve.argmin_proxy) << "\n";
  s << "hyperparam,estimate,oracle,proxy,flags\n";
  for (const auto& p : curve.points)
    s << format_double(p.hyperparam) << "," << opt(p.estimate) << "," << opt(p.oracle) << "," << opt(p.proxy) << ","
      << csv_field(p.flags) << "\n";
  out << s.str();
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Regularised precision-matrix estimation with data-driven error estimates", "pmest"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  std::string suite;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"gen", "write synthetic X (and Sigma) from sigma.* keys"},
      {"estimate", "write R_X(lambda), or R_Aug(lambda) when scheme.* and m are set"},
      {"lambda-curve", "error estimate over lambda_grid (CSV)"},
      {"alpha-curve", "augmented error estimate over alpha_grid (CSV)"},
      {"tune", "print the minimising lambda (or alpha with alpha_grid) and write the curve"},
      {"augment", "write m augmented samples for scheme.*"},
      {"validate", "run validation suites and write JSON-lines reports"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "key=value config file");
    sub->add_option("-t,--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    if (name == "validate") sub->add_option("--suite", suite, "suite name or 'all'");
    sub->add_option("overrides", overrides, "key=value overrides");
  }

  std::vector<const char*> argv = {"pmest"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "pmest: " << e.what() << "\n";
    return kExitConfigError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Context ctx{config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path), out, err, command};
    for (const auto& o : overrides) ctx.cfg.set_assignment(o);
    const int saved_threads = num_threads();
    if (threads > 0) set_num_threads(threads);
    struct Restore {
      int n;
      ~Restore() { set_num_threads(n); }
    } restore{saved_threads};

    if (command == "gen") return cmd_gen(ctx);
    if (command == "estimate") return cmd_estimate(ctx);
    if (command == "lambda-curve") return cmd_curve(ctx, false);
    if (command == "alpha-curve") return cmd_curve(ctx, true);
    if (command == "tune") return cmd_tune(ctx);
    if (command == "augment") return cmd_augment(ctx);
    if (command == "validate") return cmd_validate(ctx, suite);
  } catch (const std::exception& e) {
    err << "pmest " << command << ": " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}

}  // namespace pmest
