#include "etklab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "etklab/csv.hpp"
#include "etklab/errors.hpp"
#include "etklab/io.hpp"
#include "etklab/learning.hpp"
#include "etklab/mercer.hpp"
#include "etklab/parallel.hpp"
#include "etklab/quantum_etk.hpp"
#include "etklab/single_layer.hpp"
#include "etklab/svg.hpp"

namespace etklab {

namespace fs = std::filesystem;

namespace {

struct Context {
  std::string command;
  Json config;
  fs::path config_dir;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  Caps caps;
  std::ostream* out = nullptr;
};

const Json& section(const Context& ctx, const char* key) {
  static const Json empty = Json::object();
  return ctx.config.contains(key) ? ctx.config.at(key) : empty;
}

std::uint64_t uint_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_number_unsigned()) throw SchemaError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

double double_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_number()) throw SchemaError(where + "." + key + ": expected a number");
  return v.get<double>();
}

bool bool_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_boolean()) throw SchemaError(where + "." + key + ": expected true or false");
  return v.get<bool>();
}

std::string string_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_string()) throw SchemaError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> point_field(const Json& v, const std::string& where) {
  if (!v.is_array()) throw SchemaError(where + ": expected an array of numbers");
  std::vector<double> x;
  for (const auto& e : v) {
    if (!e.is_number()) throw SchemaError(where + ": expected an array of numbers");
    x.push_back(e.get<double>());
  }
  return x;
}

std::vector<std::size_t> sizes_field(const Json& j, const char* key, const std::string& where) {
  const Json& v = j.at(key);
  if (!v.is_array() || v.empty()) throw SchemaError(where + "." + key + ": expected a non-empty integer array");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_unsigned()) throw SchemaError(where + "." + key + ": expected non-negative integers");
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::uint64_t require_seed(const Context& ctx) {
  if (!ctx.seed) throw SchemaError("config: \"seed\" is required for the " + ctx.command + " command");
  return *ctx.seed;
}

fs::path resolve(const Context& ctx, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : ctx.config_dir / path;
}

std::string load_path(const Context& ctx, const char* key) {
  const Json& paths = section(ctx, "paths");
  return read_file(resolve(ctx, string_field(paths, key, "paths")).string());
}

void emit(const Context& ctx, const std::string& name, const std::string& content) {
  const fs::path p = ctx.out_dir / name;
  write_file(p.string(), content);
  *ctx.out << "wrote " << p.string() << "\n";
}

CoreRoute route_field(const Json& params, const std::string& where) {
  if (!params.contains("route")) return CoreRoute::Ptm;
  const std::string r = string_field(params, "route", where);
  if (r == "ptm") return CoreRoute::Ptm;
  if (r == "dense") return CoreRoute::Dense;
  throw SchemaError(where + ".route: expected \"dense\" or \"ptm\"");
}

std::vector<ScalingModel> models_field(const Json& params, const std::string& where) {
  const Json& v = params.at("models");
  if (!v.is_array() || v.empty()) throw SchemaError(where + ".models: expected a non-empty array");
  std::vector<ScalingModel> models;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string w = where + ".models[" + std::to_string(i) + "]";
    if (v[i].is_string()) {
      if (v[i].get<std::string>() != "haar") throw SchemaError(w + ": expected \"haar\" or {\"s\", \"eps\"}");
      models.push_back(ScalingModel::haar());
      continue;
    }
    check_fields(v[i], {"s", "eps"}, {"s"}, w);
    const double eps = v[i].contains("eps") ? double_field(v[i], "eps", w) : 0.001;
    models.push_back(ScalingModel::concentrated(uint_field(v[i], "s", w), eps));
  }
  for (std::size_t i = 0; i < models.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (models[i].name == models[k].name) throw SchemaError(where + ".models: duplicate model " + models[i].name);
  return models;
}

void cmd_eval(Context& ctx) {
  const Json& paths = section(ctx, "paths");
  const Json& params = section(ctx, "parameters");
  check_fields(paths, {"circuit", "kernel"}, {}, "paths");
  check_fields(params, {"x", "xp", "pairs", "route"}, {}, "parameters");
  const bool has_circuit = paths.contains("circuit"), has_kernel = paths.contains("kernel");
  if (has_circuit == has_kernel) throw SchemaError("paths: give exactly one of \"circuit\" or \"kernel\"");
  std::vector<std::pair<std::vector<double>, std::vector<double>>> pairs;
  if (params.contains("pairs")) {
    if (params.contains("x") || params.contains("xp")) throw SchemaError("parameters: use either pairs or x/xp");
    const Json& p = params.at("pairs");
    if (!p.is_array() || p.empty()) throw SchemaError("parameters.pairs: expected a non-empty array");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const std::string w = "parameters.pairs[" + std::to_string(i) + "]";
      if (!p[i].is_array() || p[i].size() != 2) throw SchemaError(w + ": expected [x, x']");
      pairs.emplace_back(point_field(p[i][0], w), point_field(p[i][1], w));
    }
  } else {
    if (!params.contains("x") || !params.contains("xp")) throw SchemaError("parameters: x and xp are required");
    pairs.emplace_back(point_field(params.at("x"), "parameters.x"), point_field(params.at("xp"), "parameters.xp"));
  }
  if (has_circuit) {
    const StandardFormCircuit circ = circuit_from_json(parse_json(load_path(ctx, "circuit"), "circuit"));
    const EtkKernel k = etk_from_circuit(circ, route_field(params, "parameters"), ctx.caps);
    CsvWriter w({"pair", "etk", "statevector", "abs_diff"});
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (pairs[i].first.size() != circ.data_dim() || pairs[i].second.size() != circ.data_dim())
        throw SchemaError("parameters: points must have dimension " + std::to_string(circ.data_dim()));
      const double a = k.evaluate(pairs[i].first, pairs[i].second);
      const double b = simulate_kernel(circ, pairs[i].first, pairs[i].second, ctx.caps);
      w.row({std::to_string(i), format_double(a), format_double(b), format_double(std::abs(a - b))});
    }
    *ctx.out << w.str();
    emit(ctx, "eval.csv", w.str());
    return;
  }
  if (params.contains("route")) throw SchemaError("parameters.route: only meaningful with a circuit");
  const EtkKernel k = kernel_from_json(parse_json(load_path(ctx, "kernel"), "kernel"));
  CsvWriter w({"pair", "etk"});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].first.size() != k.data_dim() || pairs[i].second.size() != k.data_dim())
      throw SchemaError("parameters: points must have dimension " + std::to_string(k.data_dim()));
    w.row({std::to_string(i), format_double(k.evaluate(pairs[i].first, pairs[i].second))});
  }
  *ctx.out << w.str();
  emit(ctx, "eval.csv", w.str());
}

void cmd_extract(Context& ctx) {
  const Json& paths = section(ctx, "paths");
  const Json& params = section(ctx, "parameters");
  check_fields(paths, {"circuit"}, {"circuit"}, "paths");
  check_fields(params, {"route", "format", "trunc_tol"}, {}, "parameters");
  const std::string format = params.contains("format") ? string_field(params, "format", "parameters") : "dense";
  if (format != "dense" && format != "mpo") throw SchemaError("parameters.format: expected \"dense\" or \"mpo\"");
  const double tol = params.contains("trunc_tol") ? double_field(params, "trunc_tol", "parameters") : 0.0;
  if (tol < 0.0) throw SchemaError("parameters.trunc_tol: must be >= 0");
  const StandardFormCircuit circ = circuit_from_json(parse_json(load_path(ctx, "circuit"), "circuit"));
  const CoreRoute route = route_field(params, "parameters");
  const DenseMatrix ct = build_core_CT(circ, route, ctx.caps);
  Json core;
  if (format == "dense") {
    core = Json{{"kind", "dense"}, {"matrix", matrix_to_json(ct)}};
  } else {
    core = mpo_to_json(mpo_from_dense(ct, SiteStructure::uniform(circ.num_sites(), 3), tol));
  }
  emit(ctx, "core_ct.json", core.dump(2) + "\n");
  const DenseMatrix real = ct.real().cast<cplx>();
  const EtkKernel k = EtkKernel::from_feature_set(circ.feature_set(), LocalBasis::T,
                                                  DenseCore{(real + real.transpose()) * 0.5});
  emit(ctx, "kernel.json", kernel_to_json(k).dump(2) + "\n");
  *ctx.out << "C_T " << ct.rows() << "x" << ct.cols() << ", max |Im| " << format_double(ct.imag().cwiseAbs().maxCoeff())
           << ", hermiticity defect " << format_double(hermiticity_defect(ct)) << "\n";
}

void cmd_mercer(Context& ctx) {
  const Json& paths = section(ctx, "paths");
  const Json& params = section(ctx, "parameters");
  check_fields(paths, {"circuit", "kernel"}, {}, "paths");
  check_fields(params, {"dep_tol", "provider", "quadrature_nodes", "mc_samples"}, {}, "parameters");
  const bool has_circuit = paths.contains("circuit"), has_kernel = paths.contains("kernel");
  if (has_circuit == has_kernel) throw SchemaError("paths: give exactly one of \"circuit\" or \"kernel\"");
  MercerOptions opts;
  if (params.contains("dep_tol")) opts.dep_tol = double_field(params, "dep_tol", "parameters");
  if (params.contains("quadrature_nodes")) opts.quadrature_nodes = uint_field(params, "quadrature_nodes", "parameters");
  if (params.contains("mc_samples")) opts.mc_samples = uint_field(params, "mc_samples", "parameters");
  if (params.contains("provider")) {
    const std::string p = string_field(params, "provider", "parameters");
    if (p == "analytic")
      opts.provider = InnerProductKind::AnalyticFourier;
    else if (p == "quadrature")
      opts.provider = InnerProductKind::Quadrature;
    else if (p == "monte_carlo")
      opts.provider = InnerProductKind::MonteCarlo;
    else
      throw SchemaError("parameters.provider: expected analytic, quadrature or monte_carlo");
  }
  if (opts.provider == InnerProductKind::MonteCarlo) opts.mc_seed = require_seed(ctx);
  const EtkKernel k = has_circuit
                          ? etk_from_circuit(circuit_from_json(parse_json(load_path(ctx, "circuit"), "circuit")),
                                             CoreRoute::Ptm, ctx.caps)
                          : kernel_from_json(parse_json(load_path(ctx, "kernel"), "kernel"));
  const MercerDecomposition dec = mercer_decompose(k, opts, ctx.caps);
  emit(ctx, "mercer.json", mercer_to_json(dec));
  emit(ctx, "spectrum.csv", spectrum_to_csv(dec.eigenvalues));
  *ctx.out << "rank " << dec.rank << ", largest eigenvalue "
           << format_double(dec.eigenvalues.empty() ? 0.0 : dec.eigenvalues.front()) << "\n";
  for (const auto& w : dec.warnings) *ctx.out << "warning: " << w << "\n";
}

void cmd_spectrum(Context& ctx) {
  const Json& params = section(ctx, "parameters");
  check_fields(section(ctx, "paths"), {}, {}, "paths");
  check_fields(params, {"n", "state", "s", "eps", "psi2", "instances", "top_p"}, {"state"}, "parameters");
  const std::string state = string_field(params, "state", "parameters");
  const std::size_t instances = params.contains("instances") ? uint_field(params, "instances", "parameters") : 1;
  if (instances == 0) throw SchemaError("parameters.instances: must be >= 1");
  std::vector<std::vector<double>> psi2s;
  std::size_t n = 0;
  if (state == "explicit") {
    if (!params.contains("psi2")) throw SchemaError("parameters.psi2: required for an explicit state");
    psi2s.push_back(point_field(params.at("psi2"), "parameters.psi2"));
    std::size_t dim = psi2s[0].size();
    while ((std::size_t{1} << n) < dim) ++n;
    if (params.contains("n") && uint_field(params, "n", "parameters") != n)
      throw SchemaError("parameters.n: disagrees with the length of psi2");
  } else {
    if (!params.contains("n")) throw SchemaError("parameters.n: required");
    n = uint_field(params, "n", "parameters");
    if (n < 1 || n > ctx.caps.spectrum_qubits)
      throw ResourceError("spectrum: n = " + std::to_string(n) + " outside 1.." + std::to_string(ctx.caps.spectrum_qubits) +
                          "; raise caps.spectrum_qubits");
    const std::size_t dim = std::size_t{1} << n;
    if (state == "uniform") {
      psi2s.assign(1, std::vector<double>(dim, 1.0 / static_cast<double>(dim)));
    } else if (state == "haar" || state == "concentrated") {
      const std::uint64_t seed = require_seed(ctx);
      ScalingModel m = ScalingModel::haar();
      if (state == "concentrated") {
        if (!params.contains("s")) throw SchemaError("parameters.s: required for a concentrated state");
        m = ScalingModel::concentrated(uint_field(params, "s", "parameters"),
                                       params.contains("eps") ? double_field(params, "eps", "parameters") : 0.001);
      }
      for (std::size_t i = 0; i < instances; ++i) {
        Rng rng = make_rng(seed, {model_stream_id(m.name), n, i});
        psi2s.push_back((state == "haar" ? haar_state(n, rng) : concentrated_state(n, m.s, m.eps, rng)).probabilities());
      }
    } else {
      throw SchemaError("parameters.state: expected uniform, haar, concentrated or explicit");
    }
  }
  const std::size_t p = params.contains("top_p") ? uint_field(params, "top_p", "parameters") : tailored_term_count(n);
  CsvWriter top({"instance", "rank", "eigenvalue"});
  SvgPlot plot;
  plot.title = "Single-layer kernel spectrum (n = " + std::to_string(n) + ")";
  plot.x_label = "rank";
  plot.y_label = "eigenvalue";
  plot.log_y = true;
  for (std::size_t i = 0; i < psi2s.size(); ++i) {
    const auto eig = sorted_eigenvalues(single_layer_spectrum(psi2s[i], ctx.caps));
    emit(ctx, "spectrum_" + std::to_string(i) + ".csv", spectrum_rank_csv(eig));
    for (std::size_t r = 0; r < std::min(p, eig.size()); ++r)
      top.row({std::to_string(i), std::to_string(r + 1), format_double(eig[r])});
    if (i < 8) {
      SvgSeries s;
      s.name = "instance " + std::to_string(i);
      for (std::size_t r = 0; r < eig.size(); ++r) {
        s.x.push_back(static_cast<double>(r + 1));
        s.y.push_back(eig[r]);
      }
      plot.series.push_back(std::move(s));
    }
    *ctx.out << "instance " << i << ": largest eigenvalue " << format_double(eig.front()) << "\n";
  }
  emit(ctx, "spectrum_top.csv", top.str());
  emit(ctx, "spectrum.svg", plot.render());
}

void cmd_scaling(Context& ctx) {
  const Json& params = section(ctx, "parameters");
  check_fields(section(ctx, "paths"), {}, {}, "paths");
  check_fields(params, {"n_values", "models", "instances"}, {"n_values", "models"}, "parameters");
  ScalingConfig cfg;
  cfg.n_values = sizes_field(params, "n_values", "parameters");
  cfg.models = models_field(params, "parameters");
  if (params.contains("instances")) cfg.instances = uint_field(params, "instances", "parameters");
  cfg.seed = require_seed(ctx);
  const ScalingResult res = eigenvalue_scaling_experiment(cfg, ctx.caps);
  emit(ctx, "scaling.csv", res.to_csv());
  SvgPlot plot;
  plot.title = "Largest eigenvalue vs qubits";
  plot.x_label = "n";
  plot.y_label = "largest eigenvalue";
  plot.log_y = true;
  for (const auto& m : cfg.models) {
    SvgSeries s;
    s.name = m.name;
    for (const auto& c : res.cells)
      if (c.model == m.name) {
        s.x.push_back(static_cast<double>(c.n));
        s.y.push_back(c.mean);
        s.lo.push_back(c.mean - c.std > 0.0 ? c.mean - c.std : c.mean);
        s.hi.push_back(c.mean + c.std);
      }
    plot.series.push_back(std::move(s));
  }
  emit(ctx, "scaling.svg", plot.render());
}

void cmd_learn(Context& ctx) {
  const Json& params = section(ctx, "parameters");
  check_fields(section(ctx, "paths"), {}, {}, "paths");
  check_fields(params, {"n", "models", "instances", "total", "test_ratio", "schedule", "lambda", "zero_target"},
               {"models"}, "parameters");
  LearningConfig cfg;
  if (params.contains("n")) cfg.n = uint_field(params, "n", "parameters");
  cfg.models = models_field(params, "parameters");
  if (params.contains("instances")) cfg.instances = uint_field(params, "instances", "parameters");
  if (params.contains("total")) cfg.total = uint_field(params, "total", "parameters");
  if (params.contains("test_ratio")) cfg.test_ratio = double_field(params, "test_ratio", "parameters");
  if (params.contains("schedule")) cfg.schedule = sizes_field(params, "schedule", "parameters");
  if (params.contains("lambda")) cfg.lambda = double_field(params, "lambda", "parameters");
  if (params.contains("zero_target")) cfg.zero_target = bool_field(params, "zero_target", "parameters");
  cfg.seed = require_seed(ctx);
  const LearningResult res = learning_experiment(cfg, ctx.caps);
  emit(ctx, "learning.csv", res.to_csv());
  bool positive = true;
  for (const auto& c : res.cells)
    for (double v : c.mean_mse) positive = positive && v > 0.0;
  SvgPlot plot;
  plot.title = "KRR learning curves (n = " + std::to_string(cfg.n) + ")";
  plot.x_label = "training samples";
  plot.y_label = "test MSE";
  plot.log_x = true;
  plot.log_y = positive;
  for (const auto& c : res.cells) {
    SvgSeries s;
    s.name = c.model;
    for (std::size_t i = 0; i < c.schedule.size(); ++i) {
      s.x.push_back(static_cast<double>(c.schedule[i]));
      s.y.push_back(c.mean_mse[i]);
      const double lo = c.mean_mse[i] - c.std_mse[i];
      s.lo.push_back(positive && lo <= 0.0 ? c.mean_mse[i] : lo);
      s.hi.push_back(c.mean_mse[i] + c.std_mse[i]);
    }
    plot.series.push_back(std::move(s));
  }
  emit(ctx, "learning.svg", plot.render());
  const std::size_t h = res.half_index;
  for (const auto& c : res.cells)
    *ctx.out << c.model << ": mse at m=" << c.schedule[h] << " " << format_double(c.mean_mse[h]) << ", at m="
             << c.schedule.back() << " " << format_double(c.mean_mse.back()) << "\n";
}

Caps caps_from_config(const Context& ctx) {
  Caps caps;
  if (ctx.config.contains("caps")) {
    const Json& c = ctx.config.at("caps");
    check_fields(c, {"dense_entries", "statevector_qubits", "dense_route_sites", "ptm_route_sites", "spectrum_qubits"},
                 {}, "caps");
    if (c.contains("dense_entries")) caps.dense_entries = uint_field(c, "dense_entries", "caps");
    if (c.contains("statevector_qubits")) caps.statevector_qubits = uint_field(c, "statevector_qubits", "caps");
    if (c.contains("dense_route_sites")) caps.dense_route_sites = uint_field(c, "dense_route_sites", "caps");
    if (c.contains("ptm_route_sites")) caps.ptm_route_sites = uint_field(c, "ptm_route_sites", "caps");
    if (c.contains("spectrum_qubits")) caps.spectrum_qubits = uint_field(c, "spectrum_qubits", "caps");
  }
  if (std::getenv("ETKLAB_CAP_QUBITS")) caps.statevector_qubits = default_caps().statevector_qubits;
  return caps;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, std::function<void(Context&)>> commands{
      {"eval", cmd_eval},     {"extract", cmd_extract}, {"mercer", cmd_mercer},
      {"spectrum", cmd_spectrum}, {"scaling", cmd_scaling}, {"learn", cmd_learn}};

  CLI::App app{"Entangled tensor kernel toolkit", "etklab"};
  std::string config_path, out_dir = ".";
  std::size_t threads = 0;
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");
  app.add_option("--seed", seed_flag, "master seed, overrides the config");
  app.require_subcommand(1, 1);
  for (const auto& [name, _] : commands) app.add_subcommand(name, "run the " + name + " command")->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitSchema;
  }

  Context ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  ctx.out = &out;
  try {
    set_thread_count(threads);
    ctx.config_dir = fs::path(config_path).parent_path();
    ctx.config = parse_json(read_file(config_path), config_path);
    check_fields(ctx.config, {"experiment", "seed", "caps", "paths", "parameters"}, {}, "config");
    if (ctx.config.contains("experiment") && string_field(ctx.config, "experiment", "config") != ctx.command)
      throw SchemaError("config.experiment: \"" + ctx.config.at("experiment").get<std::string>() +
                        "\" does not match the " + ctx.command + " command");
    if (ctx.config.contains("seed")) ctx.seed = uint_field(ctx.config, "seed", "config");
    if (seed_flag) ctx.seed = seed_flag;
    for (const char* key : {"paths", "parameters"})
      if (ctx.config.contains(key) && !ctx.config.at(key).is_object())
        throw SchemaError(std::string("config.") + key + ": expected an object");
    ctx.caps = caps_from_config(ctx);
    ctx.out_dir = out_dir;
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    commands.at(ctx.command)(ctx);
    return kExitOk;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const ResourceError& e) {
    err << "resource cap exceeded: " << e.what() << "\n";
    return kExitCap;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitSchema;
  } catch (const StructuralError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace etklab
