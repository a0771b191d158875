#include "etklab/mercer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <gsl/gsl_integration.h>

#include "json.hpp"

#include "etklab/csv.hpp"
#include "etklab/errors.hpp"
#include "etklab/parallel.hpp"
#include "etklab/rng.hpp"

namespace etklab {

namespace {

constexpr std::size_t kChunks = 64;

// Σ_p w_p conj(F(x_p)) F(x_p)^T over points produced by `point(p, x)`, reduced in a
// fixed chunk order so the result does not depend on the thread count.
template <typename PointFn>
std::pair<DenseMatrix, Eigen::MatrixXd> accumulate(const FunctionBasis& basis, std::size_t count, PointFn point,
                                                   bool second_moment) {
  const std::size_t d = basis.size();
  std::vector<DenseMatrix> parts(kChunks, DenseMatrix::Zero(d, d));
  std::vector<Eigen::MatrixXd> sq(kChunks, second_moment ? Eigen::MatrixXd::Zero(d, d) : Eigen::MatrixXd());
  parallel_for(kChunks, [&](std::size_t c) {
    const std::size_t lo = count * c / kChunks, hi = count * (c + 1) / kChunks;
    std::vector<double> x(basis.data_dim());
    for (std::size_t p = lo; p < hi; ++p) {
      const double w = point(p, x);
      const CVector f = basis.eval(x);
      const DenseMatrix outer = f.conjugate() * f.transpose();
      parts[c] += w * outer;
      if (second_moment) sq[c] += outer.cwiseAbs2();
    }
  });
  DenseMatrix g = DenseMatrix::Zero(d, d);
  Eigen::MatrixXd s2 = second_moment ? Eigen::MatrixXd::Zero(d, d) : Eigen::MatrixXd();
  for (std::size_t c = 0; c < kChunks; ++c) {
    g += parts[c];
    if (second_moment) s2 += sq[c];
  }
  return {g, s2};
}

std::vector<FourierSeries> product_series(const std::vector<std::vector<FourierSeries>>& per_site, std::size_t dim) {
  std::vector<FourierSeries> acc{fourier_constant(dim, 1.0)};
  for (const auto& site : per_site) {
    std::vector<FourierSeries> next;
    next.reserve(acc.size() * site.size());
    for (const auto& a : acc)
      for (const auto& b : site) next.push_back(fourier_product(a, b));
    acc = std::move(next);
  }
  return acc;
}

struct NodeSet {
  std::size_t count = 0;
  std::function<double(std::size_t, std::vector<double>&)> point;  // fills x, returns the weight
};

NodeSet node_set(const FunctionBasis& b) {
  NodeSet ns;
  const std::size_t dd = b.data_dim();
  if (b.provider() == InnerProductKind::Quadrature) {
    if (dd > 3) throw ValidationError("quadrature inner products support at most 3 input dimensions");
    const std::size_t nodes = b.quadrature_nodes();
    gsl_integration_glfixed_table* table = gsl_integration_glfixed_table_alloc(nodes);
    auto xs = std::make_shared<std::vector<double>>(nodes);
    auto ws = std::make_shared<std::vector<double>>(nodes);
    for (std::size_t i = 0; i < nodes; ++i)
      gsl_integration_glfixed_point(-std::numbers::pi, std::numbers::pi, i, &(*xs)[i], &(*ws)[i], table);
    gsl_integration_glfixed_table_free(table);
    const double norm = 1.0 / (2.0 * std::numbers::pi);
    ns.count = 1;
    for (std::size_t k = 0; k < dd; ++k) ns.count *= nodes;
    ns.point = [=](std::size_t p, std::vector<double>& x) {
      double w = 1.0;
      for (std::size_t k = dd; k-- > 0;) {
        const std::size_t i = p % nodes;
        p /= nodes;
        x[k] = (*xs)[i];
        w *= (*ws)[i] * norm;
      }
      return w;
    };
  } else {
    const std::size_t n = b.mc_samples();
    const std::uint64_t seed = b.mc_seed();
    ns.count = n;
    ns.point = [=](std::size_t p, std::vector<double>& x) {
      Rng rng = make_rng(seed, {p});
      std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
      for (std::size_t k = 0; k < dd; ++k) x[k] = u(rng);
      return 1.0 / static_cast<double>(n);
    };
  }
  return ns;
}

// Shared tail of both Gram–Schmidt paths: q_k are coefficient vectors of e_k over F,
// proj(t, k) = ⟨e_k, F_dependent[t]⟩.
template <typename Proj>
void finish_gram_schmidt(GramSchmidtResult& res, const std::vector<CVector>& q, Proj proj) {
  res.rank = res.independent.size();
  res.l_tilde = DenseMatrix::Zero(res.rank, res.rank);
  for (std::size_t k = 0; k < res.rank; ++k)
    for (std::size_t m = 0; m < res.rank; ++m) res.l_tilde(k, m) = q[k](res.independent[m]);
  res.alpha = DenseMatrix::Zero(res.dependent.size(), res.rank);
  for (std::size_t t = 0; t < res.dependent.size(); ++t) {
    CVector c(res.rank);
    for (std::size_t k = 0; k < res.rank; ++k) c(k) = proj(t, k);
    res.alpha.row(t) = c.transpose() * res.l_tilde;
  }
}

constexpr std::size_t kMaxCoordinateEntries = std::size_t{1} << 24;

}  // namespace

FunctionBasis::FunctionBasis(std::size_t size, std::size_t data_dim, Evaluator eval, std::string description)
    : size_(size), data_dim_(data_dim), eval_(std::move(eval)), description_(std::move(description)) {
  if (size_ == 0) throw StructuralError("function basis must have at least one component");
  if (data_dim_ == 0) throw StructuralError("function basis needs a positive input dimension");
  kind_ = data_dim_ <= 3 ? InnerProductKind::Quadrature : InnerProductKind::MonteCarlo;
}

FunctionBasis FunctionBasis::fourier(std::vector<FourierSeries> components, std::string description) {
  if (components.empty()) throw StructuralError("function basis must have at least one component");
  std::size_t dim = 0;
  for (const auto& s : components)
    for (const auto& [w, c] : s) {
      if (dim == 0) dim = w.size();
      if (w.size() != dim) throw StructuralError("Fourier components disagree on the input dimension");
    }
  if (dim == 0) throw StructuralError("Fourier basis has no terms");
  auto shared = std::make_shared<std::vector<FourierSeries>>(components);
  FunctionBasis b(components.size(), dim,
                  [shared](std::span<const double> x) {
                    CVector v(shared->size());
                    for (std::size_t i = 0; i < shared->size(); ++i) v(i) = fourier_eval((*shared)[i], x);
                    return v;
                  },
                  std::move(description));
  b.series_ = std::move(components);
  b.kind_ = InnerProductKind::AnalyticFourier;
  return b;
}

FunctionBasis FunctionBasis::from_kernel(const EtkKernel& kernel) {
  const std::size_t d = kernel.structure().total_dim();
  auto k = std::make_shared<EtkKernel>(kernel);
  FunctionBasis b(d, kernel.data_dim(), [k](std::span<const double> x) { return k->product_feature(x); },
                  "product feature components");
  std::vector<std::vector<FourierSeries>> per_site;
  bool analytic = true;
  for (const auto& s : kernel.sites()) {
    auto f = s.fourier();
    if (!f) {
      analytic = false;
      break;
    }
    per_site.push_back(std::move(*f));
  }
  if (analytic) {
    b.series_ = product_series(per_site, kernel.data_dim());
    b.kind_ = InnerProductKind::AnalyticFourier;
    b.description_ = "product feature components (Fourier)";
  }
  return b;
}

FunctionBasis FunctionBasis::with_quadrature(std::size_t nodes_per_dim) const {
  if (data_dim_ > 3) throw ValidationError("quadrature inner products support at most 3 input dimensions");
  if (nodes_per_dim < 1) throw ValidationError("quadrature needs at least one node per dimension");
  FunctionBasis b = *this;
  b.kind_ = InnerProductKind::Quadrature;
  b.nodes_ = nodes_per_dim;
  return b;
}

FunctionBasis FunctionBasis::with_monte_carlo(std::size_t samples, std::uint64_t seed) const {
  if (samples < 2) throw ValidationError("Monte Carlo inner products need at least 2 samples");
  FunctionBasis b = *this;
  b.kind_ = InnerProductKind::MonteCarlo;
  b.samples_ = samples;
  b.seed_ = seed;
  return b;
}

GramReport FunctionBasis::gram() const {
  GramReport rep;
  const std::size_t d = size_;
  switch (kind_) {
    case InnerProductKind::AnalyticFourier: {
      const auto& s = *series_;
      rep.gram = DenseMatrix(d, d);
      parallel_for(d, [&](std::size_t i) {
        for (std::size_t j = i; j < d; ++j) rep.gram(i, j) = fourier_inner(s[i], s[j]);
      });
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) rep.gram(i, j) = std::conj(rep.gram(j, i));
      break;
    }
    case InnerProductKind::Quadrature: {
      const NodeSet nodes = node_set(*this);
      rep.gram = accumulate(*this, nodes.count, nodes.point, false).first;
      break;
    }
    case InnerProductKind::MonteCarlo: {
      const std::size_t n = samples_;
      const NodeSet nodes = node_set(*this);
      auto [g, s2] = accumulate(*this, n, nodes.point, true);
      const double nn = static_cast<double>(n);
      double worst = 0.0;
      for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) {
          const double var = std::max(0.0, s2(i, j) / nn - std::norm(g(i, j))) * nn / (nn - 1.0);
          worst = std::max(worst, std::sqrt(var / nn));
        }
      rep.gram = std::move(g);
      rep.max_stderr = worst;
      break;
    }
  }
  return rep;
}

GramSchmidtResult gram_schmidt_basis(const DenseMatrix& gram, double dep_tol) {
  if (!(dep_tol > 0.0)) throw ValidationError("dep_tol must be > 0");
  if (gram.rows() != gram.cols() || gram.rows() == 0) throw StructuralError("Gram matrix must be square and non-empty");
  const std::size_t d = static_cast<std::size_t>(gram.rows());
  if (hermiticity_defect(gram) > 1e-10) throw ValidationError("inner-product provider is not Hermitian");
  const double tr = std::abs(gram.trace().real());
  if (min_eigenvalue(gram) < -1e-10 * std::max(tr, 1e-300))
    throw ValidationError("inner-product provider is indefinite on the span");

  auto inner = [&](const CVector& a, const CVector& b) { return a.dot(gram * b); };
  std::vector<CVector> q;  // coefficient vectors of e_k over F
  GramSchmidtResult res;
  for (std::size_t i = 0; i < d; ++i) {
    CVector r = CVector::Zero(d);
    r(i) = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& qk : q) r -= inner(qk, r) * qk;
    const double norm2 = inner(r, r).real();
    const double scale = std::sqrt(std::max(gram(i, i).real(), 0.0));
    if (norm2 <= 0.0 || std::sqrt(norm2) <= dep_tol * scale) {
      res.dependent.push_back(i);
    } else {
      res.independent.push_back(i);
      q.push_back(r / std::sqrt(norm2));
    }
  }
  finish_gram_schmidt(res, q, [&](std::size_t t, std::size_t k) { return q[k].dot(gram.col(res.dependent[t])); });
  return res;
}

DenseMatrix FunctionBasis::coordinates() const {
  const std::size_t d = size_;
  if (kind_ == InnerProductKind::AnalyticFourier) {
    std::map<std::vector<int>, std::size_t> freq;
    for (const auto& s : *series_)
      for (const auto& [w, c] : s) freq.emplace(w, 0);
    std::size_t m = 0;
    for (auto& [w, idx] : freq) idx = m++;
    DenseMatrix phi = DenseMatrix::Zero(m, d);
    for (std::size_t i = 0; i < d; ++i)
      for (const auto& [w, c] : (*series_)[i]) phi(freq.at(w), i) = c;
    return phi;
  }
  const NodeSet nodes = node_set(*this);
  if (nodes.count * d > kMaxCoordinateEntries)
    throw ResourceError("basis coordinates need " + std::to_string(nodes.count * d) + " entries");
  DenseMatrix phi(nodes.count, d);
  parallel_for(kChunks, [&](std::size_t c) {
    const std::size_t lo = nodes.count * c / kChunks, hi = nodes.count * (c + 1) / kChunks;
    std::vector<double> x(data_dim_);
    for (std::size_t p = lo; p < hi; ++p) {
      const double w = nodes.point(p, x);
      phi.row(p) = std::sqrt(w) * eval(x).transpose();
    }
  });
  return phi;
}

GramSchmidtResult gram_schmidt_basis(const FunctionBasis& basis, double dep_tol) {
  if (!(dep_tol > 0.0)) throw ValidationError("dep_tol must be > 0");
  std::size_t rows = 0;
  if (basis.provider() == InnerProductKind::Quadrature) {
    rows = 1;
    for (std::size_t k = 0; k < basis.data_dim(); ++k) rows *= basis.quadrature_nodes();
  } else if (basis.provider() == InnerProductKind::MonteCarlo) {
    rows = basis.mc_samples();
  }
  if (rows * basis.size() > kMaxCoordinateEntries) return gram_schmidt_basis(basis.gram().gram, dep_tol);
  const DenseMatrix phi = basis.coordinates();
  const std::size_t d = basis.size();
  std::vector<CVector> q, qy;  // coefficients over F and coordinates of e_k
  GramSchmidtResult res;
  for (std::size_t i = 0; i < d; ++i) {
    CVector r = CVector::Zero(d);
    r(i) = 1.0;
    CVector y = phi.col(i);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t k = 0; k < q.size(); ++k) {
        const cplx p = qy[k].dot(y);
        r -= p * q[k];
        y -= p * qy[k];
      }
    const double norm = y.norm();
    if (norm == 0.0 || norm <= dep_tol * phi.col(i).norm()) {
      res.dependent.push_back(i);
    } else {
      res.independent.push_back(i);
      q.push_back(r / norm);
      qy.push_back(y / norm);
    }
  }
  finish_gram_schmidt(res, q, [&](std::size_t t, std::size_t k) { return qy[k].dot(phi.col(res.dependent[t])); });
  return res;
}

DenseMatrix pad_L(const GramSchmidtResult& gs) {
  const std::size_t r = gs.rank;
  const std::size_t d = r + gs.dependent.size();
  DenseMatrix permuted = DenseMatrix::Identity(d, d);
  if (r > 0) {
    permuted.topLeftCorner(r, r) = gs.l_tilde;
    permuted.bottomLeftCorner(d - r, r) = -gs.alpha;
  }
  std::vector<std::size_t> order = gs.independent;
  order.insert(order.end(), gs.dependent.begin(), gs.dependent.end());
  DenseMatrix l(d, d);
  for (std::size_t c = 0; c < d; ++c) l.col(order[c]) = permuted.col(c);
  return l;
}

TransformResult transform_truncate(const DenseMatrix& c, const DenseMatrix& l, std::size_t rank) {
  if (c.rows() != l.rows() || c.cols() != l.cols() || c.rows() != c.cols())
    throw StructuralError("transform_truncate: C and L must be square of the same size");
  if (rank > static_cast<std::size_t>(c.rows())) throw StructuralError("transform_truncate: rank exceeds dimension");
  TransformResult out;
  Eigen::JacobiSVD<DenseMatrix> svd(l);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0) throw NumericalError("transform_truncate: L is singular");
  out.condition = sv(0) / smin;
  out.ill_conditioned = out.condition > 1e12;
  const Eigen::PartialPivLU<DenseMatrix> lu(l);
  const DenseMatrix linv = lu.inverse();
  const DenseMatrix hat = linv.adjoint() * c * linv;
  out.c_tilde = hat.topLeftCorner(rank, rank);
  return out;
}

MercerDecomposition diagonalize(const DenseMatrix& c_tilde) {
  if (c_tilde.rows() != c_tilde.cols()) throw StructuralError("diagonalize: C̃ must be square");
  if (hermiticity_defect(c_tilde) > 1e-10) throw ValidationError("diagonalize: C̃ is not Hermitian");
  MercerDecomposition dec;
  dec.rank = static_cast<std::size_t>(c_tilde.rows());
  if (dec.rank == 0) {
    dec.u = DenseMatrix(0, 0);
    return dec;
  }
  const DenseMatrix h = (c_tilde + c_tilde.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h);
  const auto n = static_cast<Eigen::Index>(dec.rank);
  dec.u = DenseMatrix(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index src = n - 1 - i;
    dec.eigenvalues.push_back(es.eigenvalues()(src));
    dec.u.row(i) = es.eigenvectors().col(src).adjoint();
  }
  return dec;
}

CVector MercerDecomposition::eigenfunctions(std::span<const double> x) const {
  if (!functions) throw StructuralError("Mercer decomposition has no evaluable basis");
  return coefficients * functions->eval(x);
}

cplx reconstruct_kernel_complex(const MercerDecomposition& dec, std::span<const double> x,
                                std::span<const double> xp) {
  const CVector a = dec.eigenfunctions(x);
  const CVector b = dec.eigenfunctions(xp);
  cplx k{};
  for (std::size_t i = 0; i < dec.eigenvalues.size(); ++i) k += dec.eigenvalues[i] * std::conj(a(i)) * b(i);
  return k;
}

double reconstruct_kernel(const MercerDecomposition& dec, std::span<const double> x, std::span<const double> xp) {
  return reconstruct_kernel_complex(dec, x, xp).real();
}

DenseMatrix eigenfunction_gram(const MercerDecomposition& dec, const FunctionBasis& basis) {
  if (basis.size() != static_cast<std::size_t>(dec.coefficients.cols()))
    throw StructuralError("eigenfunction_gram: basis size does not match the decomposition");
  const DenseMatrix g = basis.gram().gram;
  return dec.coefficients.conjugate() * g * dec.coefficients.transpose();
}

MercerDecomposition mercer_decompose(const FunctionBasis& basis, const DenseMatrix& core, const MercerOptions& opts) {
  if (static_cast<std::size_t>(core.rows()) != basis.size() || core.rows() != core.cols())
    throw StructuralError("mercer_decompose: core is " + std::to_string(core.rows()) + "x" +
                          std::to_string(core.cols()) + " but the basis has " + std::to_string(basis.size()) +
                          " components");
  const GramSchmidtResult gs = gram_schmidt_basis(basis, opts.dep_tol);
  const double stderr_bound = basis.provider() == InnerProductKind::MonteCarlo ? basis.gram().max_stderr : 0.0;
  const DenseMatrix l = pad_L(gs);
  const TransformResult tr = transform_truncate(core, l, gs.rank);
  MercerDecomposition dec = diagonalize(tr.c_tilde);
  dec.coefficients = dec.u * l.topRows(gs.rank);
  dec.basis = basis.description();
  dec.functions = std::make_shared<const FunctionBasis>(basis);
  if (tr.ill_conditioned)
    dec.warnings.push_back("L is ill-conditioned (cond " + format_double(tr.condition) + ")");
  if (stderr_bound > 0.0)
    dec.warnings.push_back("Monte Carlo inner products, max standard error " + format_double(stderr_bound));
  return dec;
}

MercerDecomposition mercer_decompose(const EtkKernel& kernel, const MercerOptions& opts, const Caps& caps) {
  FunctionBasis basis = FunctionBasis::from_kernel(kernel);
  if (opts.provider) {
    switch (*opts.provider) {
      case InnerProductKind::AnalyticFourier:
        if (basis.provider() != InnerProductKind::AnalyticFourier)
          throw ValidationError("kernel components are not finite trigonometric polynomials");
        break;
      case InnerProductKind::Quadrature:
        basis = basis.with_quadrature(opts.quadrature_nodes);
        break;
      case InnerProductKind::MonteCarlo:
        basis = basis.with_monte_carlo(opts.mc_samples, opts.mc_seed);
        break;
    }
  } else if (basis.provider() == InnerProductKind::Quadrature) {
    basis = basis.with_quadrature(opts.quadrature_nodes);
  } else if (basis.provider() == InnerProductKind::MonteCarlo) {
    basis = basis.with_monte_carlo(opts.mc_samples, opts.mc_seed);
  }
  return mercer_decompose(basis, kernel.dense_core(caps), opts);
}

std::string mercer_to_json(const MercerDecomposition& dec) {
  nlohmann::ordered_json j;
  j["rank"] = dec.rank;
  j["eigenvalues"] = dec.eigenvalues;
  j["basis"] = dec.basis;
  auto complex_rows = [](const DenseMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
      rows.push_back(row);
    }
    return rows;
  };
  j["U"] = complex_rows(dec.u);
  j["coefficients"] = complex_rows(dec.coefficients);
  if (!dec.labels.empty()) j["labels"] = dec.labels;
  if (!dec.warnings.empty()) j["warnings"] = dec.warnings;
  return j.dump(2) + "\n";
}

std::string spectrum_to_csv(std::span<const double> eigenvalues) {
  CsvWriter w({"index", "eigenvalue"});
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) w.row({std::to_string(i), format_double(eigenvalues[i])});
  return w.str();
}

}  // namespace etklab
