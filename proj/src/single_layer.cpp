#include "etklab/single_layer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "etklab/csv.hpp"
#include "etklab/errors.hpp"
#include "etklab/parallel.hpp"

namespace etklab {

namespace {

std::size_t pow3(std::size_t n) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < n; ++i) r *= 3;
  return r;
}

std::string trit_label(std::size_t idx, std::size_t n) {
  static const char* pairs[3] = {"00", "01", "10"};
  std::string s(2 * n, '0');
  for (std::size_t k = n; k-- > 0;) {
    const char* p = pairs[idx % 3];
    idx /= 3;
    s[2 * k] = p[0];
    s[2 * k + 1] = p[1];
  }
  return s;
}

void check_alpha(const std::string& alpha) {
  if (alpha.empty() || alpha.size() % 2) throw ValidationError("α must be a non-empty string of bit pairs");
  for (std::size_t k = 0; k < alpha.size(); k += 2) {
    const std::string p = alpha.substr(k, 2);
    if (p != "00" && p != "01" && p != "10") throw ValidationError("α pairs must be 00, 01 or 10, got " + p);
  }
}

}  // namespace

DenseMatrix haar_unitary(std::size_t dim, Rng& rng) {
  if (dim == 0) throw ValidationError("haar_unitary: dimension must be >= 1");
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  DenseMatrix z(dim, dim);
  for (std::size_t c = 0; c < dim; ++c)
    for (std::size_t r = 0; r < dim; ++r) z(r, c) = cplx(g(rng), g(rng));
  Eigen::HouseholderQR<DenseMatrix> qr(z);
  DenseMatrix q = qr.householderQ() * DenseMatrix::Identity(dim, dim);
  const DenseMatrix& rr = qr.matrixQR();
  for (std::size_t i = 0; i < dim; ++i) {
    const cplx d = rr(i, i);
    const double a = std::abs(d);
    q.col(i) *= a == 0.0 ? cplx{1.0, 0.0} : d / a;
  }
  return q;
}

DenseMatrix haar_unitary(std::size_t n, std::uint64_t seed) {
  if (n > 12) throw ResourceError("haar_unitary: at most 12 qubits");
  Rng rng(seed);
  return haar_unitary(std::size_t{1} << n, rng);
}

DenseMatrix unitary_from_state(const CVector& psi) {
  const Eigen::Index d = psi.size();
  if (d == 0) throw ValidationError("unitary_from_state: empty state");
  if (std::abs(psi.norm() - 1.0) > 1e-12) throw ValidationError("unitary_from_state: state is not normalized");
  const double theta = std::arg(psi(0));
  const cplx phase = std::polar(1.0, theta);
  CVector v = -std::conj(phase) * psi;
  v(0) += 1.0;
  DenseMatrix h = DenseMatrix::Identity(d, d);
  const double vv = v.squaredNorm();
  if (vv > 1e-30) h -= (2.0 / vv) * v * v.adjoint();
  return phase * h;
}

std::vector<double> PreEncodingState::probabilities() const {
  std::vector<double> p(static_cast<std::size_t>(psi.size()));
  for (Eigen::Index i = 0; i < psi.size(); ++i) p[i] = std::norm(psi(i));
  return p;
}

PreEncodingState haar_state(std::size_t n, Rng& rng) {
  PreEncodingState st;
  st.n = n;
  st.provenance = PreEncodingState::Provenance::Haar;
  st.w = haar_unitary(std::size_t{1} << n, rng);
  st.psi = st.w.col(0);
  return st;
}

PreEncodingState concentrated_state(std::size_t n, std::size_t s, double eps, Rng& rng) {
  const std::size_t dim = std::size_t{1} << n;
  if (s < 1 || s > dim)
    throw ValidationError("concentrated_state: s must lie in [1, " + std::to_string(dim) + "]");
  if (!(eps >= 0.0 && eps < 1.0)) throw ValidationError("concentrated_state: ε must lie in [0, 1)");
  PreEncodingState st;
  st.n = n;
  st.provenance = PreEncodingState::Provenance::Concentrated;
  st.s = s;
  st.eps = eps;

  std::vector<std::size_t> idx(dim);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < s; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, dim - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  st.support.assign(idx.begin(), idx.begin() + static_cast<long>(s));
  std::sort(st.support.begin(), st.support.end());

  const double support_mass = s == dim ? 1.0 : 1.0 - eps;
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> w(s);
  double total = 0.0;
  for (auto& v : w) total += (v = expo(rng));
  std::vector<double> mass(dim, s == dim ? 0.0 : eps / static_cast<double>(dim - s));
  for (std::size_t i = 0; i < s; ++i) mass[st.support[i]] = support_mass * w[i] / total;

  std::uniform_real_distribution<double> ph(-std::numbers::pi, std::numbers::pi);
  st.psi = CVector(dim);
  for (std::size_t i = 0; i < dim; ++i) st.psi(i) = std::polar(std::sqrt(mass[i]), ph(rng));
  st.psi /= st.psi.norm();
  st.w = unitary_from_state(st.psi);
  return st;
}

PreEncodingState concentrated_state(std::size_t n, std::size_t s, double eps, std::uint64_t seed) {
  Rng rng(seed);
  PreEncodingState st = concentrated_state(n, s, eps, rng);
  st.seed = seed;
  return st;
}

std::vector<FrequencyTerm> single_layer_spectrum(std::span<const double> psi2, const Caps& caps) {
  const std::size_t dim = psi2.size();
  if (dim < 2 || (dim & (dim - 1)) != 0) throw ValidationError("ψ² length must be a power of two >= 2");
  const std::size_t n = static_cast<std::size_t>(std::countr_zero(dim));
  if (n > caps.spectrum_qubits)
    throw ResourceError("single_layer_spectrum: " + std::to_string(n) + " qubits exceed the cap of " +
                        std::to_string(caps.spectrum_qubits));
  double sum = 0.0;
  for (double p : psi2) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("ψ² entries must be finite and non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-10) throw ValidationError("ψ² must sum to 1 (got " + format_double(sum) + ")");

  const std::size_t terms = pow3(n);
  // Trit of qubit k for a pair (a_k, b_k): 0 if equal, 1 for (0,1), 2 for (1,0).
  std::vector<double> c(terms, 0.0);
  std::vector<std::size_t> place(n);
  for (std::size_t k = 0; k < n; ++k) place[k] = pow3(n - 1 - k);
  for (std::size_t a = 0; a < dim; ++a) {
    if (psi2[a] == 0.0) continue;
    for (std::size_t b = 0; b < dim; ++b) {
      std::size_t t = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t bit = n - 1 - k;
        const unsigned ak = (a >> bit) & 1U, bk = (b >> bit) & 1U;
        if (ak != bk) t += place[k] * (ak == 0 ? 1 : 2);
      }
      c[t] += psi2[a] * psi2[b];
    }
  }
  std::vector<FrequencyTerm> out(terms);
  for (std::size_t t = 0; t < terms; ++t) {
    out[t].alpha = trit_label(t, n);
    out[t].omega.resize(n);
    std::size_t rem = t;
    for (std::size_t k = n; k-- > 0;) {
      const std::size_t trit = rem % 3;
      rem /= 3;
      out[t].omega[k] = trit == 0 ? 0 : (trit == 1 ? 1 : -1);
    }
    out[t].eigenvalue = c[t];
  }
  return out;
}

std::vector<std::string> index_set(const std::string& alpha) {
  check_alpha(alpha);
  std::vector<std::string> out{""};
  for (std::size_t k = 0; k < alpha.size(); k += 2) {
    const std::string p = alpha.substr(k, 2);
    std::vector<std::string> next;
    for (const auto& prefix : out) {
      if (p == "00") {
        next.push_back(prefix + "00");
        next.push_back(prefix + "11");
      } else {
        next.push_back(prefix + p);
      }
    }
    out = std::move(next);
  }
  return out;
}

std::string conjugate_alpha(const std::string& alpha) {
  check_alpha(alpha);
  std::string out = alpha;
  for (std::size_t k = 0; k < alpha.size(); k += 2) {
    if (alpha.compare(k, 2, "01") == 0) out.replace(k, 2, "10");
    if (alpha.compare(k, 2, "10") == 0) out.replace(k, 2, "01");
  }
  return out;
}

MercerDecomposition spectrum_to_mercer(const std::vector<FrequencyTerm>& terms) {
  if (terms.empty()) throw ValidationError("spectrum_to_mercer: no terms");
  const std::size_t n = terms.front().omega.size();
  const double r2 = std::numbers::sqrt2 / 2.0;
  struct Entry {
    double gamma;
    FourierSeries series;
    std::string label;
  };
  std::vector<Entry> entries;
  for (const auto& t : terms) {
    if (t.omega.size() != n) throw StructuralError("spectrum_to_mercer: inconsistent frequency lengths");
    const auto first = std::find_if(t.omega.begin(), t.omega.end(), [](int w) { return w != 0; });
    if (first == t.omega.end()) {
      entries.push_back({t.eigenvalue, fourier_constant(n, 1.0), "1"});
      continue;
    }
    if (*first < 0) continue;  // ᾱ is represented by α
    std::vector<int> neg(n);
    for (std::size_t k = 0; k < n; ++k) neg[k] = -t.omega[k];
    // √2 cos ω·x = (e^{iω·x} + e^{−iω·x})/√2, √2 sin ω·x = (e^{iω·x} − e^{−iω·x})/(√2 i)
    const cplx i{0.0, 1.0};
    entries.push_back({t.eigenvalue, FourierSeries{{t.omega, r2}, {neg, r2}}, "cos(" + t.alpha + ")"});
    entries.push_back({t.eigenvalue, FourierSeries{{t.omega, r2 / i}, {neg, -r2 / i}}, "sin(" + t.alpha + ")"});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.gamma > b.gamma; });
  std::vector<FourierSeries> comps;
  MercerDecomposition dec;
  for (auto& e : entries) {
    comps.push_back(e.series);
    dec.eigenvalues.push_back(e.gamma);
    dec.labels.push_back(e.label);
  }
  dec.rank = entries.size();
  dec.u = DenseMatrix::Identity(dec.rank, dec.rank);
  dec.coefficients = DenseMatrix::Identity(dec.rank, dec.rank);
  dec.basis = "1, sqrt2 cos(w.x), sqrt2 sin(w.x) on [-pi, pi]^" + std::to_string(n);
  dec.functions = std::make_shared<const FunctionBasis>(FunctionBasis::fourier(std::move(comps), dec.basis));
  return dec;
}

std::vector<double> sorted_eigenvalues(const std::vector<FrequencyTerm>& terms) {
  std::vector<double> v;
  v.reserve(terms.size());
  for (const auto& t : terms) v.push_back(t.eigenvalue);
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

ScalingModel ScalingModel::haar() { return {"haar", Kind::Haar, 0, 0.0}; }

ScalingModel ScalingModel::concentrated(std::size_t s, double eps) {
  return {"s" + std::to_string(s), Kind::Concentrated, s, eps};
}

std::uint64_t model_stream_id(const std::string& name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

const ScalingCell* ScalingResult::find(const std::string& model, std::size_t n) const {
  for (const auto& c : cells)
    if (c.model == model && c.n == n) return &c;
  return nullptr;
}

std::string ScalingResult::to_csv() const {
  CsvWriter w({"model", "n", "instance", "largest_eig", "mean", "std"});
  for (const auto& c : cells) {
    const std::string mean = format_double(c.mean), sd = format_double(c.std);
    for (std::size_t i = 0; i < c.largest.size(); ++i)
      w.row({c.model, std::to_string(c.n), std::to_string(i), format_double(c.largest[i]), mean, sd});
    w.row({c.model, std::to_string(c.n), "aggregate", mean, mean, sd});
  }
  return w.str();
}

ScalingResult eigenvalue_scaling_experiment(const ScalingConfig& cfg, const Caps& caps) {
  if (cfg.instances == 0) throw ValidationError("scaling experiment needs at least one instance");
  if (cfg.models.empty()) throw ValidationError("scaling experiment needs at least one model");
  ScalingResult res;
  for (const auto& m : cfg.models)
    for (std::size_t n : cfg.n_values) {
      if (n < 1 || n > caps.spectrum_qubits)
        throw ResourceError("scaling experiment: n = " + std::to_string(n) + " outside 1.." +
                            std::to_string(caps.spectrum_qubits));
      if (m.kind == ScalingModel::Kind::Concentrated && m.s > (std::size_t{1} << n)) continue;
      ScalingCell cell;
      cell.model = m.name;
      cell.n = n;
      cell.largest.assign(cfg.instances, 0.0);
      if (cfg.keep_spectra) cell.spectra.resize(cfg.instances);
      res.cells.push_back(std::move(cell));
    }
  std::vector<std::pair<std::size_t, const ScalingModel*>> owner;
  for (const auto& c : res.cells)
    for (const auto& m : cfg.models)
      if (m.name == c.model) {
        owner.emplace_back(c.n, &m);
        break;
      }
  const std::size_t jobs = res.cells.size() * cfg.instances;
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t ci = job / cfg.instances, inst = job % cfg.instances;
    ScalingCell& cell = res.cells[ci];
    const ScalingModel& m = *owner[ci].second;
    Rng rng = make_rng(cfg.seed, {model_stream_id(m.name), cell.n, inst});
    const PreEncodingState st = m.kind == ScalingModel::Kind::Haar ? haar_state(cell.n, rng)
                                                                   : concentrated_state(cell.n, m.s, m.eps, rng);
    const auto terms = single_layer_spectrum(st.probabilities(), caps);
    auto eig = sorted_eigenvalues(terms);
    cell.largest[inst] = eig.front();
    if (cfg.keep_spectra) cell.spectra[inst] = std::move(eig);
  });
  for (auto& c : res.cells) {
    double sum = 0.0;
    for (double v : c.largest) sum += v;
    c.mean = sum / static_cast<double>(c.largest.size());
    double var = 0.0;
    for (double v : c.largest) var += (v - c.mean) * (v - c.mean);
    c.std = std::sqrt(var / static_cast<double>(c.largest.size()));
  }
  return res;
}

std::string spectrum_rank_csv(std::span<const double> eigenvalues) {
  CsvWriter w({"rank", "eigenvalue"});
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) w.row({std::to_string(i + 1), format_double(eigenvalues[i])});
  return w.str();
}

}  // namespace etklab
