#include "etklab/etk.hpp"

#include <cmath>
#include <sstream>

#include "etklab/errors.hpp"
#include "etklab/parallel.hpp"

namespace etklab {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

std::vector<FourierSeries> product_components(const std::vector<std::vector<FourierSeries>>& per_site,
                                              std::size_t data_dim) {
  std::vector<FourierSeries> acc{fourier_constant(data_dim, 1.0)};
  for (const auto& site : per_site) {
    std::vector<FourierSeries> next;
    next.reserve(acc.size() * site.size());
    for (const auto& a : acc)
      for (const auto& b : site) next.push_back(fourier_product(a, b));
    acc = std::move(next);
  }
  return acc;
}

// Returns B with B B† = embed(C), where the embedding puts C on indices >= 1
// of a (1 + dim C)-dimensional space and leaves row/column 0 zero.
DenseMatrix embedded_psd_root(const DenseMatrix& c) {
  const Eigen::Index n = c.rows();
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es((c + c.adjoint()) * 0.5);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const DenseMatrix root = es.eigenvectors() * lam.cast<cplx>().asDiagonal();
  DenseMatrix b = DenseMatrix::Zero(n + 1, n + 1);
  b.bottomRightCorner(n, n) = root;
  return b;
}

}  // namespace

SiteFeature SiteFeature::trig(PreprocessingFn fn) {
  SiteFeature f;
  f.kind_ = Kind::Trig;
  f.dim_ = 3;
  f.data_dim_ = fn.input_dim();
  f.fn_ = std::move(fn);
  return f;
}

SiteFeature SiteFeature::exp(PreprocessingFn fn) {
  SiteFeature f;
  f.kind_ = Kind::Exp;
  f.dim_ = 4;
  f.data_dim_ = fn.input_dim();
  f.fn_ = std::move(fn);
  return f;
}

SiteFeature SiteFeature::linear(double offset, std::size_t data_dim) {
  if (!(offset >= 0.0)) throw ValidationError("linear feature offset must be >= 0");
  SiteFeature f;
  f.kind_ = Kind::Linear;
  f.dim_ = data_dim + 1;
  f.data_dim_ = data_dim;
  f.offset_ = offset;
  return f;
}

SiteFeature SiteFeature::shift_exp(double scale) {
  SiteFeature f;
  f.kind_ = Kind::ShiftExp;
  f.dim_ = 3;
  f.data_dim_ = 1;
  f.scale_ = scale;
  return f;
}

SiteFeature SiteFeature::augmented(std::vector<SiteFeature> inner) {
  if (inner.empty()) throw StructuralError("augmented feature needs at least one inner site");
  SiteFeature f;
  f.kind_ = Kind::Augmented;
  f.data_dim_ = inner.front().data_dim();
  std::size_t d = 1;
  for (const auto& s : inner) {
    if (s.data_dim() != f.data_dim_) throw StructuralError("augmented feature: inner data dims differ");
    d *= s.dim();
  }
  f.dim_ = d + 1;
  f.inner_ = std::move(inner);
  return f;
}

CVector SiteFeature::eval(std::span<const double> x) const {
  if (x.size() != data_dim_)
    throw StructuralError("feature expects input dimension " + std::to_string(data_dim_) + ", got " +
                          std::to_string(x.size()));
  CVector v(dim_);
  switch (kind_) {
    case Kind::Trig: {
      const auto t = eval_local_T(fn_, x);
      v << t[0], t[1], t[2];
      break;
    }
    case Kind::Exp: {
      const auto e = eval_local_E(fn_, x);
      v << e[0], e[1], e[2], e[3];
      break;
    }
    case Kind::Linear:
      v(0) = std::sqrt(offset_);
      for (std::size_t i = 0; i < data_dim_; ++i) v(i + 1) = x[i];
      break;
    case Kind::ShiftExp: {
      const cplx e = std::polar(1.0, scale_ * x[0]);
      v << std::conj(e), 1.0, e;
      break;
    }
    case Kind::Augmented: {
      std::vector<CVector> parts;
      for (const auto& s : inner_) parts.push_back(s.eval(x));
      v(0) = 1.0;
      v.tail(dim_ - 1) = kron_all(parts);
      break;
    }
  }
  return v;
}

std::optional<std::vector<FourierSeries>> SiteFeature::fourier() const {
  switch (kind_) {
    case Kind::Trig:
      return local_fourier(fn_, LocalBasis::T);
    case Kind::Exp:
      return local_fourier(fn_, LocalBasis::E);
    case Kind::Linear:
      return std::nullopt;
    case Kind::ShiftExp: {
      if (scale_ != std::round(scale_)) return std::nullopt;
      const int s = static_cast<int>(std::lround(scale_));
      return std::vector<FourierSeries>{FourierSeries{{{-s}, 1.0}}, FourierSeries{{{0}, 1.0}},
                                        FourierSeries{{{s}, 1.0}}};
    }
    case Kind::Augmented: {
      std::vector<std::vector<FourierSeries>> parts;
      for (const auto& s : inner_) {
        auto f = s.fourier();
        if (!f) return std::nullopt;
        parts.push_back(std::move(*f));
      }
      auto comps = product_components(parts, data_dim_);
      comps.insert(comps.begin(), fourier_constant(data_dim_, 1.0));
      return comps;
    }
  }
  return std::nullopt;
}

EtkKernel::EtkKernel(std::vector<SiteFeature> sites, CoreTensor core, KernelBasis basis)
    : sites_(std::move(sites)), core_(std::move(core)), basis_(basis) {
  if (sites_.empty()) throw StructuralError("ETK needs at least one site");
  data_dim_ = sites_.front().data_dim();
  for (const auto& s : sites_)
    if (s.data_dim() != data_dim_) throw StructuralError("ETK sites disagree on the input dimension");
  const SiteStructure st = structure();
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DenseCore>) {
          const auto d = static_cast<Eigen::Index>(st.total_dim());
          if (c.matrix.rows() != d || c.matrix.cols() != d)
            throw StructuralError("dense core is " + std::to_string(c.matrix.rows()) + "x" +
                                  std::to_string(c.matrix.cols()) + ", features need " + std::to_string(d));
        } else if constexpr (std::is_same_v<T, MpoCore>) {
          if (c.mpo.row_structure() != st || c.mpo.col_structure() != st)
            throw StructuralError("MPO core local dimensions do not match the features");
        } else {
          if (c.lp.structure() != st) throw StructuralError("LPMPO core local dimensions do not match the features");
        }
      },
      core_);
}

EtkKernel EtkKernel::from_feature_set(const LocalFeatureSet& set, LocalBasis basis, CoreTensor core) {
  std::vector<SiteFeature> sites;
  for (const auto& fn : set.maps)
    sites.push_back(basis == LocalBasis::T ? SiteFeature::trig(fn) : SiteFeature::exp(fn));
  return EtkKernel(std::move(sites), std::move(core), basis == LocalBasis::T ? KernelBasis::T : KernelBasis::E);
}

SiteStructure EtkKernel::structure() const {
  std::vector<std::size_t> d;
  for (const auto& s : sites_) d.push_back(s.dim());
  return SiteStructure(std::move(d));
}

std::vector<CVector> EtkKernel::local_features(std::span<const double> x) const {
  std::vector<CVector> out;
  out.reserve(sites_.size());
  for (const auto& s : sites_) out.push_back(s.eval(x));
  return out;
}

CVector EtkKernel::product_feature(std::span<const double> x) const { return kron_all(local_features(x)); }

cplx EtkKernel::evaluate_complex(std::span<const double> x, std::span<const double> xp) const {
  if (x.size() != data_dim_ || xp.size() != data_dim_)
    throw StructuralError("ETK expects inputs of dimension " + std::to_string(data_dim_));
  return std::visit(
      [&](const auto& c) -> cplx {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DenseCore>) {
          const CVector f = product_feature(x);
          const CVector g = product_feature(xp);
          return f.dot(c.matrix * g);  // Eigen's dot conjugates the first argument
        } else if constexpr (std::is_same_v<T, MpoCore>) {
          return sandwich_contract(local_features(x), c.mpo, local_features(xp));
        } else {
          return lpmpo_sandwich(local_features(x), c.lp, local_features(xp));
        }
      },
      core_);
}

double EtkKernel::evaluate(std::span<const double> x, std::span<const double> xp) const {
  const cplx k = evaluate_complex(x, xp);
  if (std::abs(k.imag()) > 1e-10 * std::max(1.0, std::abs(k)))
    throw NumericalError("kernel value has imaginary part " + std::to_string(k.imag()));
  return k.real();
}

DenseMatrix EtkKernel::dense_core(const Caps& caps) const {
  return std::visit(
      [&](const auto& c) -> DenseMatrix {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DenseCore>) {
          return c.matrix;
        } else if constexpr (std::is_same_v<T, MpoCore>) {
          return mpo_to_dense(c.mpo, caps);
        } else {
          return lpmpo_materialize(c.lp, caps);
        }
      },
      core_);
}

GramMatrix gram_matrix(const EtkKernel& kernel, std::span<const std::vector<double>> xs) {
  const std::size_t m = xs.size();
  if (m == 0) throw ValidationError("gram_matrix: empty sample list");
  GramMatrix g(m, m);
  parallel_for(m, [&](std::size_t i) {
    for (std::size_t j = i; j < m; ++j) g(i, j) = kernel.evaluate_complex(xs[i], xs[j]);
  });
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < i; ++j) g(i, j) = std::conj(g(j, i));
  return g;
}

GramMatrix cross_gram(const EtkKernel& kernel, std::span<const std::vector<double>> a,
                      std::span<const std::vector<double>> b) {
  GramMatrix g(a.size(), b.size());
  parallel_for(a.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < b.size(); ++j) g(i, j) = kernel.evaluate_complex(a[i], b[j]);
  });
  return g;
}

EtkKernel polynomial_etk(std::size_t degree, double offset, std::size_t data_dim) {
  if (degree < 1) throw ValidationError("polynomial_etk: degree must be >= 1");
  if (!(offset >= 0.0)) throw ValidationError("polynomial_etk: offset must be >= 0");
  std::vector<SiteFeature> sites(degree, SiteFeature::linear(offset, data_dim));
  return EtkKernel(std::move(sites), LpMpoCore{LpMpo::identity(SiteStructure::uniform(degree, data_dim + 1))});
}

EtkKernel linear_sum_etk(std::span<const EtkKernel> kernels, std::span<const double> weights,
                         const Caps& caps) {
  if (kernels.empty()) throw ValidationError("linear_sum_etk: no constituent kernels");
  if (kernels.size() != weights.size()) throw ValidationError("linear_sum_etk: one weight per kernel required");
  for (double a : weights)
    if (!(a >= 0.0)) throw ValidationError("linear_sum_etk: weights must be non-negative");
  const std::size_t m = kernels.size();
  const std::size_t data_dim = kernels.front().data_dim();
  std::vector<SiteFeature> sites;
  std::vector<SiteTensor> x_sites;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& k = kernels[i];
    if (k.data_dim() != data_dim) throw ValidationError("linear_sum_etk: kernels must share the data domain");
    sites.push_back(SiteFeature::augmented(k.sites()));
    const DenseMatrix b = std::sqrt(weights[i]) * embedded_psd_root(k.dense_core(caps));
    const std::size_t d = static_cast<std::size_t>(b.rows());
    DenseMatrix p0 = DenseMatrix::Zero(d, d);
    p0(0, 0) = 1.0;
    // Bond states: 0 = constituent not yet placed, 1 = placed.
    const std::size_t left = i == 0 ? 1 : 2;
    const std::size_t right = i + 1 == m ? 1 : 2;
    SiteTensor t(left, d, d, right);
    auto put = [&](std::size_t l, std::size_t r, const DenseMatrix& mat) {
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t c = 0; c < d; ++c) t(l, a, c, r) = mat(a, c);
    };
    const std::size_t placed_r = right == 1 ? 0 : 1;
    put(0, placed_r, b);
    if (right == 2) put(0, 0, p0);
    if (left == 2) put(1, placed_r, p0);
    x_sites.push_back(std::move(t));
  }
  return EtkKernel(std::move(sites), LpMpoCore{LpMpo(std::move(x_sites))});
}

EtkKernel shift_invariant_etk(std::span<const double> coeffs) {
  if (coeffs.empty()) throw ValidationError("shift_invariant_etk: need at least γ₀");
  for (double g : coeffs)
    if (!(g >= 0.0)) throw ValidationError("shift_invariant_etk: coefficients must be non-negative");
  const long cutoff = static_cast<long>(coeffs.size()) - 1;
  std::size_t sites = 1;
  long reach = 1;  // (3^sites − 1)/2
  while (reach < cutoff) {
    ++sites;
    reach = reach * 3 + 1;
  }
  std::vector<SiteFeature> feats;
  long scale = 1;
  for (std::size_t k = 0; k < sites; ++k, scale *= 3) feats.push_back(SiteFeature::shift_exp(static_cast<double>(scale)));
  const std::size_t dim = static_cast<std::size_t>(std::pow(3.0, static_cast<double>(sites)) + 0.5);
  DenseMatrix core = DenseMatrix::Zero(dim, dim);
  for (std::size_t h = 0; h < dim; ++h) {
    // α_h = Σ_k 3^{k−1}(h_k − 1); site 0 (scale 1) is the most significant trit.
    long alpha = 0, w = 1;
    std::size_t rem = h;
    std::vector<long> trits(sites);
    for (std::size_t k = sites; k-- > 0;) {
      trits[k] = static_cast<long>(rem % 3);
      rem /= 3;
    }
    for (std::size_t k = 0; k < sites; ++k, w *= 3) alpha += w * (trits[k] - 1);
    const long j = std::labs(alpha);
    if (j > cutoff) continue;
    core(h, h) = j == 0 ? coeffs[0] : 0.5 * coeffs[static_cast<std::size_t>(j)];
  }
  return EtkKernel(std::move(feats), DenseCore{std::move(core)});
}

PsdReport verify_psd(const EtkKernel& kernel, const Caps& caps) {
  PsdReport rep;
  auto dense_check = [&](const DenseMatrix& m) {
    const double herm = hermiticity_defect(m);
    const double lam = min_eigenvalue(m);
    rep.min_eigenvalue = lam;
    const double tr = std::abs(m.trace().real());
    if (herm > 1e-12) {
      rep.status = PsdStatus::NotPsd;
      rep.reason = "core is not Hermitian";
    } else if (lam < -1e-10 * std::max(tr, 1e-300)) {
      rep.status = PsdStatus::NotPsd;
      rep.reason = "negative eigenvalue";
    } else {
      rep.status = PsdStatus::Psd;
      rep.reason = "dense eigenvalue check";
    }
  };
  std::visit(
      [&](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DenseCore>) {
          dense_check(c.matrix);
        } else if constexpr (std::is_same_v<T, MpoCore>) {
          if (c.psd_verified) {
            rep.status = PsdStatus::Psd;
            rep.reason = "MPO flagged as verified";
            return;
          }
          const std::size_t d = kernel.structure().total_dim();
          if (d * d > caps.dense_entries) {
            rep.status = PsdStatus::Unverifiable;
            rep.reason = "MPO core exceeds the dense cap";
            return;
          }
          dense_check(mpo_to_dense(c.mpo, caps));
        } else {
          rep.status = PsdStatus::Psd;
          rep.reason = "locally purified core (X X†)";
        }
      },
      kernel.core());
  return rep;
}

std::string gram_to_csv(const GramMatrix& g) {
  std::ostringstream os;
  os.precision(17);
  os << "index";
  for (Eigen::Index j = 0; j < g.cols(); ++j) os << ',' << j;
  os << '\n';
  bool complex_entries = false;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (g.data()[i].imag() != 0.0) complex_entries = true;
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    os << i;
    for (Eigen::Index j = 0; j < g.cols(); ++j) {
      os << ',' << g(i, j).real();
      if (complex_entries) os << (g(i, j).imag() < 0 ? "" : "+") << g(i, j).imag() << 'i';
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace etklab
