#include "etklab/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "etklab/csv.hpp"
#include "etklab/errors.hpp"
#include "etklab/parallel.hpp"
#include "etklab/rng.hpp"
#include "json.hpp"

namespace etklab {

namespace {

RealMatrix real_gram(const GramMatrix& g, const char* what) {
  if (g.rows() != g.cols()) throw StructuralError(std::string(what) + ": Gram matrix must be square");
  double scale = 0.0, imag = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const cplx v = g.data()[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw ValidationError(std::string(what) + ": Gram matrix has non-finite entries");
    scale = std::max(scale, std::abs(v));
    imag = std::max(imag, std::abs(v.imag()));
  }
  if (imag > 1e-10 * std::max(scale, 1.0)) throw ValidationError(std::string(what) + ": Gram matrix is not real");
  return g.real();
}

std::vector<int> omega_of(const std::string& alpha) {
  std::vector<int> w;
  for (std::size_t k = 0; k + 1 < alpha.size(); k += 2) {
    const std::string p = alpha.substr(k, 2);
    w.push_back(p == "01" ? 1 : (p == "10" ? -1 : 0));
  }
  return w;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  double s = 0.0;
  for (double x : v) s += x;
  mean = s / static_cast<double>(v.size());
  double q = 0.0;
  for (double x : v) q += (x - mean) * (x - mean);
  sd = std::sqrt(q / static_cast<double>(v.size()));
}

}  // namespace

double default_ridge(const GramMatrix& gram) {
  if (gram.rows() == 0) return 1e-8;
  const double mean = gram.diagonal().real().mean();
  return mean > 0.0 ? 1e-8 * mean : 1e-8;
}

KrrModel krr_fit(const GramMatrix& gram, std::span<const double> y, double lambda) {
  const RealMatrix g = real_gram(gram, "krr_fit");
  const auto m = static_cast<std::size_t>(g.rows());
  if (m == 0) throw ValidationError("krr_fit: no training samples");
  if (y.size() != m) throw StructuralError("krr_fit: target length does not match the Gram matrix");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("krr_fit: ridge must be positive and finite");
  RealVector rhs(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(y[i])) throw ValidationError("krr_fit: non-finite target");
    rhs(i) = y[i];
  }
  const RealMatrix sys = g + lambda * RealMatrix::Identity(m, m);
  KrrModel model;
  model.lambda = lambda;
  Eigen::LLT<RealMatrix> llt(sys);
  Eigen::LDLT<RealMatrix> ldlt;
  const bool use_llt = llt.info() == Eigen::Success;
  if (!use_llt) {
    ldlt.compute(sys);
    if (ldlt.info() != Eigen::Success) throw NumericalError("krr_fit: G + λI could not be factorized");
  }
  auto solve = [&](const RealVector& b) -> RealVector {
    if (use_llt) return llt.solve(b);
    return ldlt.solve(b);
  };
  model.coefficients = solve(rhs);
  const double target = 1e-10 * rhs.norm();
  for (int it = 0; it < 3; ++it) {
    const RealVector r = rhs - sys * model.coefficients;
    if (r.norm() <= target) break;
    model.coefficients += solve(r);
  }
  if (!model.coefficients.allFinite()) throw NumericalError("krr_fit: solve produced non-finite coefficients");
  return model;
}

KrrModel krr_fit(const GramMatrix& gram, std::span<const double> y, double lambda,
                 std::vector<std::vector<double>> inputs) {
  if (inputs.size() != y.size()) throw StructuralError("krr_fit: one input per target required");
  KrrModel model = krr_fit(gram, y, lambda);
  model.inputs = std::move(inputs);
  return model;
}

std::vector<double> krr_predict(const KrrModel& model, const GramMatrix& cross) {
  if (static_cast<std::size_t>(cross.cols()) != static_cast<std::size_t>(model.coefficients.size()))
    throw StructuralError("krr_predict: cross Gram has the wrong number of columns");
  const RealVector f = cross.real() * model.coefficients;
  return {f.data(), f.data() + f.size()};
}

std::vector<double> krr_predict(const KrrModel& model, const EtkKernel& kernel,
                                std::span<const std::vector<double>> xs) {
  if (model.inputs.size() != static_cast<std::size_t>(model.coefficients.size()))
    throw StructuralError("krr_predict: model has no training inputs attached");
  if (xs.empty()) return {};
  return krr_predict(model, cross_gram(kernel, xs, model.inputs));
}

double kernel_target_alignment(const GramMatrix& gram, std::span<const double> y) {
  const RealMatrix g = real_gram(gram, "kernel_target_alignment");
  if (static_cast<std::size_t>(g.rows()) != y.size())
    throw StructuralError("kernel_target_alignment: target length does not match the Gram matrix");
  const RealVector v = Eigen::Map<const RealVector>(y.data(), static_cast<Eigen::Index>(y.size()));
  const double gn = g.norm(), yn = v.squaredNorm();
  if (gn == 0.0 || yn == 0.0) throw ValidationError("kernel_target_alignment: zero Gram or zero target");
  return std::clamp(v.dot(g * v) / (gn * yn), -1.0, 1.0);
}

double TailoredTarget::operator()(std::span<const double> x) const {
  if (x.size() != n) throw StructuralError("tailored target expects input dimension " + std::to_string(n));
  double f = 0.0;
  for (std::size_t t = 0; t < alpha.size(); ++t) {
    double phase = 0.0;
    for (std::size_t k = 0; k < n; ++k) phase += omega[t][k] * x[k];
    f += std::sqrt(coefficients[t]) * std::cos(phase);
  }
  return f;
}

double TailoredTarget::bound() const {
  double b = 0.0;
  for (double c : coefficients) b += std::sqrt(c);
  return b;
}

std::size_t tailored_term_count(std::size_t n) { return 1 + n + n * (n - 1) / 2; }

TailoredTarget tailored_target(const MercerDecomposition& dec, std::size_t p, std::uint64_t seed) {
  if (!dec.functions) throw ValidationError("tailored_target: decomposition carries no basis");
  const std::size_t n = dec.functions->data_dim();
  struct Candidate {
    double gamma;
    std::string alpha;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < dec.labels.size(); ++i) {
    const std::string& l = dec.labels[i];
    if (l == "1")
      cands.push_back({dec.eigenvalues[i], std::string(2 * n, '0')});
    else if (l.rfind("cos(", 0) == 0 && l.back() == ')')
      cands.push_back({dec.eigenvalues[i], l.substr(4, l.size() - 5)});
  }
  if (cands.empty()) throw ValidationError("tailored_target: decomposition has no cosine terms");
  if (p == 0 || p > cands.size())
    throw ValidationError("tailored_target: P = " + std::to_string(p) + " but only " +
                          std::to_string(cands.size()) + " cosine terms are available");
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.gamma != b.gamma ? a.gamma > b.gamma : a.alpha < b.alpha;
  });
  Rng rng(seed);
  std::uniform_real_distribution<double> factor(0.5, 1.5);
  TailoredTarget t;
  t.n = n;
  for (std::size_t i = 0; i < p; ++i) {
    t.alpha.push_back(cands[i].alpha);
    t.omega.push_back(omega_of(cands[i].alpha));
    t.coefficients.push_back(std::max(cands[i].gamma, 0.0) * factor(rng));
  }
  return t;
}

std::vector<std::vector<double>> Dataset::train_inputs() const { return pick(inputs, train); }
std::vector<std::vector<double>> Dataset::test_inputs() const { return pick(inputs, test); }
std::vector<double> Dataset::train_targets() const { return pick(targets, train); }
std::vector<double> Dataset::test_targets() const { return pick(targets, test); }

std::size_t test_count(std::size_t total, double test_ratio) {
  const double raw = test_ratio * static_cast<double>(total);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

Dataset generate_dataset(const TailoredTarget& target, std::size_t n, std::size_t total, double test_ratio,
                         std::uint64_t seed) {
  if (total < 10) throw ValidationError("generate_dataset: total must be at least 10");
  if (!(test_ratio > 0.0 && test_ratio < 1.0)) throw ValidationError("generate_dataset: test ratio must lie in (0, 1)");
  if (target.n != n) throw StructuralError("generate_dataset: target dimension differs from n");
  Dataset d;
  d.n = n;
  d.seed = seed;
  d.test_ratio = test_ratio;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  d.inputs.resize(total);
  for (auto& x : d.inputs) {
    x.resize(n);
    for (auto& v : x) v = u(rng);
  }
  for (const auto& x : d.inputs) d.targets.push_back(target(x));
  std::vector<std::size_t> perm(total);
  for (std::size_t i = 0; i < total; ++i) perm[i] = i;
  for (std::size_t i = total - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> j(0, i);
    std::swap(perm[i], perm[j(rng)]);
  }
  const std::size_t tc = test_count(total, test_ratio);
  d.test.assign(perm.begin(), perm.begin() + static_cast<long>(tc));
  d.train.assign(perm.begin() + static_cast<long>(tc), perm.end());
  return d;
}

std::string dataset_to_json(const Dataset& data) {
  nlohmann::ordered_json j;
  j["n"] = data.n;
  j["seed"] = data.seed;
  j["test_ratio"] = data.test_ratio;
  j["inputs"] = data.inputs;
  j["targets"] = data.targets;
  j["train"] = data.train;
  j["test"] = data.test;
  return j.dump(2) + "\n";
}

Dataset dataset_from_json(const std::string& text) {
  static const std::set<std::string> known{"n", "seed", "test_ratio", "inputs", "targets", "train", "test"};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("dataset JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("dataset JSON: expected an object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ValidationError("dataset JSON: unknown field '" + key + "'");
  for (const auto& key : known)
    if (!j.contains(key)) throw ValidationError("dataset JSON: missing field '" + key + "'");
  Dataset d;
  try {
    d.n = j.at("n").get<std::size_t>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.test_ratio = j.at("test_ratio").get<double>();
    d.inputs = j.at("inputs").get<std::vector<std::vector<double>>>();
    d.targets = j.at("targets").get<std::vector<double>>();
    d.train = j.at("train").get<std::vector<std::size_t>>();
    d.test = j.at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("dataset JSON: ") + e.what());
  }
  const std::size_t total = d.inputs.size();
  if (d.targets.size() != total) throw ValidationError("dataset JSON: one target per input required");
  for (const auto& x : d.inputs)
    if (x.size() != d.n) throw ValidationError("dataset JSON: input of the wrong dimension");
  std::vector<char> seen(total, 0);
  for (const auto* part : {&d.train, &d.test})
    for (auto i : *part) {
      if (i >= total || seen[i]) throw ValidationError("dataset JSON: train/test split is not a partition");
      seen[i] = 1;
    }
  if (d.train.size() + d.test.size() != total) throw ValidationError("dataset JSON: split does not cover all samples");
  return d;
}

std::vector<std::size_t> log_schedule(std::size_t lo, std::size_t hi, std::size_t points) {
  if (lo == 0 || hi < lo) throw ValidationError("log_schedule: need 1 <= lo <= hi");
  if (points < 2 || lo == hi) return {hi};
  std::vector<std::size_t> s;
  const double ratio = static_cast<double>(hi) / static_cast<double>(lo);
  for (std::size_t k = 0; k < points; ++k) {
    const double v = static_cast<double>(lo) * std::pow(ratio, static_cast<double>(k) / static_cast<double>(points - 1));
    const auto m = std::clamp(static_cast<std::size_t>(std::llround(v)), lo, hi);
    if (s.empty() || m > s.back()) s.push_back(m);
  }
  s.back() = hi;
  return s;
}

std::size_t half_data_index(std::span<const std::size_t> schedule, std::size_t train) {
  if (schedule.empty()) throw ValidationError("half_data_index: empty schedule");
  const double half = static_cast<double>(train) / 2.0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (std::abs(static_cast<double>(schedule[i]) - half) < std::abs(static_cast<double>(schedule[best]) - half))
      best = i;
  return best;
}

std::vector<CurvePoint> learning_curve(const GramMatrix& full_gram, const Dataset& data,
                                       std::span<const std::size_t> schedule, std::optional<double> lambda) {
  const std::size_t total = data.inputs.size();
  if (static_cast<std::size_t>(full_gram.rows()) != total || static_cast<std::size_t>(full_gram.cols()) != total)
    throw StructuralError("learning_curve: Gram must cover every input");
  if (data.test.empty()) throw ValidationError("learning_curve: empty test split");
  for (auto m : schedule)
    if (m == 0 || m > data.train.size())
      throw ValidationError("learning_curve: schedule size " + std::to_string(m) + " outside 1.." +
                            std::to_string(data.train.size()));
  std::vector<CurvePoint> out(schedule.size());
  const std::vector<double> y_test = data.test_targets();
  parallel_for(schedule.size(), [&](std::size_t s) {
    const std::size_t m = schedule[s];
    const std::vector<std::size_t> idx(data.train.begin(), data.train.begin() + static_cast<long>(m));
    GramMatrix g(m, m), cross(data.test.size(), m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) g(i, j) = full_gram(idx[i], idx[j]);
    for (std::size_t i = 0; i < data.test.size(); ++i)
      for (std::size_t j = 0; j < m; ++j) cross(i, j) = full_gram(data.test[i], idx[j]);
    const std::vector<double> y = pick(data.targets, idx);
    const KrrModel model = krr_fit(g, y, lambda.value_or(default_ridge(g)));
    const std::vector<double> pred = krr_predict(model, cross);
    double se = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - y_test[i]) * (pred[i] - y_test[i]);
    double yy = 0.0;
    for (double v : y) yy += v * v;
    out[s].m = m;
    out[s].mse = se / static_cast<double>(pred.size());
    out[s].alignment = yy == 0.0 ? std::numeric_limits<double>::quiet_NaN() : kernel_target_alignment(g, y);
  });
  return out;
}

std::vector<CurvePoint> learning_curve(const EtkKernel& kernel, const Dataset& data,
                                       std::span<const std::size_t> schedule, std::optional<double> lambda) {
  return learning_curve(gram_matrix(kernel, data.inputs), data, schedule, lambda);
}

StandardFormCircuit single_layer_circuit(const DenseMatrix& w) {
  const auto dim = static_cast<std::size_t>(w.rows());
  if (dim < 2 || (dim & (dim - 1)) != 0) throw StructuralError("single_layer_circuit: W must be 2^n x 2^n");
  std::size_t n = 0;
  while ((std::size_t{1} << n) < dim) ++n;
  std::vector<PreprocessingFn> enc;
  for (std::size_t k = 0; k < n; ++k) enc.push_back(PreprocessingFn::coordinate(k, n));
  return StandardFormCircuit(n, {w}, {enc});
}

const LearningCell* LearningResult::find(const std::string& model) const {
  for (const auto& c : cells)
    if (c.model == model) return &c;
  return nullptr;
}

std::string LearningResult::to_csv() const {
  CsvWriter w({"model", "instance", "m", "mse", "alignment"});
  for (const auto& c : cells) {
    for (std::size_t i = 0; i < c.curves.size(); ++i)
      for (const auto& p : c.curves[i])
        w.row({c.model, std::to_string(i), std::to_string(p.m), format_double(p.mse), format_double(p.alignment)});
    for (std::size_t s = 0; s < c.schedule.size(); ++s) {
      const std::string m = std::to_string(c.schedule[s]);
      w.row({c.model, "mean", m, format_double(c.mean_mse[s]), format_double(c.mean_alignment[s])});
      w.row({c.model, "std", m, format_double(c.std_mse[s]), format_double(c.std_alignment[s])});
    }
  }
  return w.str();
}

LearningResult learning_experiment(const LearningConfig& cfg, const Caps& caps) {
  if (cfg.n < 1) throw ValidationError("learning experiment: n must be >= 1");
  if (cfg.instances == 0) throw ValidationError("learning experiment needs at least one instance");
  if (cfg.models.empty()) throw ValidationError("learning experiment needs at least one model");
  if (cfg.n > caps.ptm_route_sites)
    throw ResourceError("learning experiment: n = " + std::to_string(cfg.n) + " exceeds the ptm route cap of " +
                        std::to_string(caps.ptm_route_sites));
  for (const auto& m : cfg.models)
    if (m.kind == ScalingModel::Kind::Concentrated && (m.s < 1 || m.s > (std::size_t{1} << cfg.n)))
      throw ValidationError("learning experiment: model " + m.name + " needs 1 <= s <= 2^n");
  std::size_t pow3 = 1;
  for (std::size_t k = 0; k < cfg.n; ++k) pow3 *= 3;
  const std::size_t total = cfg.total.value_or(2 * pow3);
  if (total < 10) throw ValidationError("learning experiment: total must be at least 10");
  const std::size_t train = total - test_count(total, cfg.test_ratio);
  const std::vector<std::size_t> schedule =
      cfg.schedule.empty() ? log_schedule(std::min<std::size_t>(4, train), train, 10) : cfg.schedule;
  const std::size_t p = tailored_term_count(cfg.n);

  LearningResult res;
  res.train_size = train;
  res.half_index = half_data_index(schedule, train);
  for (const auto& m : cfg.models) {
    LearningCell c;
    c.model = m.name;
    c.schedule = schedule;
    c.curves.resize(cfg.instances);
    res.cells.push_back(std::move(c));
  }
  parallel_for(cfg.models.size() * cfg.instances, [&](std::size_t job) {
    const std::size_t mi = job / cfg.instances, inst = job % cfg.instances;
    const ScalingModel& model = cfg.models[mi];
    const std::uint64_t id = model_stream_id(model.name);
    Rng rng = make_rng(cfg.seed, {id, cfg.n, inst});
    const PreEncodingState st = model.kind == ScalingModel::Kind::Haar
                                    ? haar_state(cfg.n, rng)
                                    : concentrated_state(cfg.n, model.s, model.eps, rng);
    const MercerDecomposition dec = spectrum_to_mercer(single_layer_spectrum(st.probabilities(), caps));
    TailoredTarget target = tailored_target(dec, p, derive_seed(cfg.seed, {id, cfg.n, inst, 1}));
    if (cfg.zero_target) std::fill(target.coefficients.begin(), target.coefficients.end(), 0.0);
    const Dataset data = generate_dataset(target, cfg.n, total, cfg.test_ratio, derive_seed(cfg.seed, {id, cfg.n, inst, 2}));
    const EtkKernel kernel = etk_from_circuit(single_layer_circuit(st.w), CoreRoute::Ptm, caps);
    res.cells[mi].curves[inst] = learning_curve(kernel, data, schedule, cfg.lambda);
  });
  for (auto& c : res.cells) {
    const std::size_t k = schedule.size();
    c.mean_mse.resize(k);
    c.std_mse.resize(k);
    c.mean_alignment.resize(k);
    c.std_alignment.resize(k);
    for (std::size_t s = 0; s < k; ++s) {
      std::vector<double> mse, al;
      for (const auto& curve : c.curves) {
        mse.push_back(curve[s].mse);
        al.push_back(curve[s].alignment);
      }
      mean_std(mse, c.mean_mse[s], c.std_mse[s]);
      mean_std(al, c.mean_alignment[s], c.std_alignment[s]);
    }
  }
  return res;
}

}  // namespace etklab
