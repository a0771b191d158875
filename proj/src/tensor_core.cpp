#include "etklab/tensor_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "etklab/errors.hpp"

namespace etklab {

namespace {

void require_cap(std::size_t entries, const Caps& caps, const char* what) {
  if (entries > caps.dense_entries) {
    throw ResourceError(std::string(what) + ": " + std::to_string(entries) +
                        " entries exceed the dense cap of " + std::to_string(caps.dense_entries));
  }
}

}  // namespace

SiteStructure::SiteStructure(std::vector<std::size_t> local_dims) : dims_(std::move(local_dims)) {
  for (std::size_t d : dims_) {
    if (d == 0) throw StructuralError("site dimension must be >= 1");
  }
}

SiteStructure SiteStructure::uniform(std::size_t num_sites, std::size_t dim) {
  return SiteStructure(std::vector<std::size_t>(num_sites, dim));
}

std::size_t SiteStructure::total_dim() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

SiteTensor::SiteTensor(std::size_t l, std::size_t r, std::size_t c, std::size_t rr)
    : left(l), rows(r), cols(c), right(rr), data(l * r * c * rr, cplx{0.0, 0.0}) {}

DenseMatrix SiteTensor::slice(std::size_t l, std::size_t rr) const {
  DenseMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = (*this)(l, r, c, rr);
  return m;
}

SiteTensor SiteTensor::from_matrix(const DenseMatrix& m) {
  SiteTensor t(1, m.rows(), m.cols(), 1);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) t(0, r, c, 0) = m(r, c);
  return t;
}

Mpo::Mpo(std::vector<SiteTensor> sites) : sites_(std::move(sites)) {
  if (sites_.empty()) throw StructuralError("MPO needs at least one site");
  if (sites_.front().left != 1 || sites_.back().right != 1)
    throw StructuralError("MPO boundary bond dimensions must be 1");
  for (std::size_t k = 0; k < sites_.size(); ++k) {
    const auto& s = sites_[k];
    if (s.data.size() != s.left * s.rows * s.cols * s.right)
      throw StructuralError("MPO site " + std::to_string(k) + " has inconsistent data size");
    if (s.rows == 0 || s.cols == 0) throw StructuralError("MPO site dimensions must be >= 1");
    if (k + 1 < sites_.size() && s.right != sites_[k + 1].left)
      throw StructuralError("MPO bond mismatch between sites " + std::to_string(k) + " and " +
                            std::to_string(k + 1));
  }
}

SiteStructure Mpo::row_structure() const {
  std::vector<std::size_t> d;
  for (const auto& s : sites_) d.push_back(s.rows);
  return SiteStructure(std::move(d));
}

SiteStructure Mpo::col_structure() const {
  std::vector<std::size_t> d;
  for (const auto& s : sites_) d.push_back(s.cols);
  return SiteStructure(std::move(d));
}

std::size_t Mpo::max_bond() const {
  std::size_t chi = 1;
  for (const auto& s : sites_) chi = std::max({chi, s.left, s.right});
  return chi;
}

Mpo Mpo::product(std::span<const DenseMatrix> factors) {
  std::vector<SiteTensor> sites;
  for (const auto& f : factors) sites.push_back(SiteTensor::from_matrix(f));
  return Mpo(std::move(sites));
}

Mpo Mpo::identity(const SiteStructure& s) {
  std::vector<DenseMatrix> f;
  for (std::size_t d : s.dims()) f.push_back(DenseMatrix::Identity(d, d));
  return product(f);
}

LpMpo::LpMpo(std::vector<SiteTensor> sites) : x_(std::move(sites)) {}

LpMpo LpMpo::identity(const SiteStructure& s) {
  std::vector<SiteTensor> sites;
  for (std::size_t d : s.dims()) sites.push_back(SiteTensor::from_matrix(DenseMatrix::Identity(d, d)));
  return LpMpo(std::move(sites));
}

Mpo mpo_from_dense(const DenseMatrix& matrix, const SiteStructure& structure, double trunc_tol) {
  const std::size_t dim = structure.total_dim();
  if (static_cast<std::size_t>(matrix.rows()) != dim || static_cast<std::size_t>(matrix.cols()) != dim)
    throw StructuralError("mpo_from_dense: matrix is " + std::to_string(matrix.rows()) + "x" +
                          std::to_string(matrix.cols()) + " but the site structure needs " +
                          std::to_string(dim));
  if (!(trunc_tol >= 0.0)) throw ValidationError("mpo_from_dense: trunc_tol must be >= 0");
  const std::size_t n = structure.num_sites();
  const auto& d = structure.dims();

  // Regroup M[(r_1..r_N),(c_1..c_N)] into the site-paired vector v[(r_1 c_1)(r_2 c_2)...].
  std::vector<std::size_t> stride(n, 1);
  for (std::size_t k = n; k-- > 1;) stride[k - 1] = stride[k] * d[k];
  std::vector<cplx> v(dim * dim);
  std::vector<std::size_t> ri(n), ci(n);
  for (std::size_t row = 0; row < dim; ++row) {
    for (std::size_t k = 0; k < n; ++k) ri[k] = (row / stride[k]) % d[k];
    for (std::size_t col = 0; col < dim; ++col) {
      std::size_t idx = 0;
      for (std::size_t k = 0; k < n; ++k) {
        ci[k] = (col / stride[k]) % d[k];
        idx = idx * d[k] * d[k] + ri[k] * d[k] + ci[k];
      }
      v[idx] = matrix(row, col);
    }
  }

  const double norm = matrix.norm();
  const double step_budget =
      n > 1 ? trunc_tol * norm / std::sqrt(static_cast<double>(n - 1)) : 0.0;

  std::vector<SiteTensor> sites;
  std::size_t chi = 1;
  std::size_t remaining = dim * dim;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const std::size_t local = d[k] * d[k];
    remaining /= local;
    const std::size_t rows = chi * local;
    DenseMatrix m(rows, remaining);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < remaining; ++j) m(i, j) = v[i * remaining + j];
    Eigen::BDCSVD<DenseMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    std::size_t keep = static_cast<std::size_t>(sv.size());
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    if (trunc_tol == 0.0) {
      while (keep > 1 && sv(keep - 1) <= 1e-14 * smax) --keep;
    } else {
      double tail = 0.0;
      while (keep > 1) {
        const double next = tail + sv(keep - 1) * sv(keep - 1);
        if (std::sqrt(next) > step_budget) break;
        tail = next;
        --keep;
      }
    }
    SiteTensor site(chi, d[k], d[k], keep);
    const DenseMatrix& u = svd.matrixU();
    for (std::size_t l = 0; l < chi; ++l)
      for (std::size_t r = 0; r < d[k]; ++r)
        for (std::size_t c = 0; c < d[k]; ++c)
          for (std::size_t b = 0; b < keep; ++b)
            site(l, r, c, b) = u((l * d[k] + r) * d[k] + c, static_cast<Eigen::Index>(b));
    sites.push_back(std::move(site));
    DenseMatrix rest = sv.head(keep).cast<cplx>().asDiagonal() * svd.matrixV().leftCols(keep).adjoint();
    v.assign(keep * remaining, cplx{});
    for (std::size_t i = 0; i < keep; ++i)
      for (std::size_t j = 0; j < remaining; ++j) v[i * remaining + j] = rest(i, j);
    chi = keep;
  }
  SiteTensor last(chi, d[n - 1], d[n - 1], 1);
  for (std::size_t l = 0; l < chi; ++l)
    for (std::size_t r = 0; r < d[n - 1]; ++r)
      for (std::size_t c = 0; c < d[n - 1]; ++c)
        last(l, r, c, 0) = v[(l * d[n - 1] + r) * d[n - 1] + c];
  sites.push_back(std::move(last));
  return Mpo(std::move(sites));
}

DenseMatrix mpo_to_dense(const Mpo& mpo, const Caps& caps) {
  const std::size_t rows = mpo.row_structure().total_dim();
  const std::size_t cols = mpo.col_structure().total_dim();
  require_cap(rows * cols, caps, "mpo_to_dense");
  // acc[b] is the partial matrix over the sites seen so far, open at bond b.
  std::vector<DenseMatrix> acc{DenseMatrix::Ones(1, 1)};
  for (const auto& s : mpo.sites()) {
    std::vector<DenseMatrix> next(s.right);
    for (std::size_t br = 0; br < s.right; ++br) {
      next[br] = DenseMatrix::Zero(acc[0].rows() * s.rows, acc[0].cols() * s.cols);
      for (std::size_t bl = 0; bl < s.left; ++bl) next[br] += kron(acc[bl], s.slice(bl, br));
    }
    acc = std::move(next);
  }
  return acc[0];
}

cplx sandwich_contract(std::span<const CVector> bra, const Mpo& core, std::span<const CVector> ket) {
  const std::size_t n = core.num_sites();
  if (bra.size() != n || ket.size() != n)
    throw StructuralError("sandwich_contract: expected " + std::to_string(n) + " local vectors");
  std::vector<cplx> env{cplx{1.0, 0.0}};
  std::vector<cplx> tmp;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = core.site(k);
    if (static_cast<std::size_t>(bra[k].size()) != s.rows ||
        static_cast<std::size_t>(ket[k].size()) != s.cols)
      throw StructuralError("sandwich_contract: local vector dimension mismatch at site " +
                            std::to_string(k));
    tmp.assign(s.right, cplx{});
    for (std::size_t l = 0; l < s.left; ++l) {
      const cplx e = env[l];
      if (e == cplx{}) continue;
      for (std::size_t r = 0; r < s.rows; ++r) {
        const cplx er = e * std::conj(bra[k](r));
        for (std::size_t c = 0; c < s.cols; ++c) {
          const cplx erc = er * ket[k](c);
          const cplx* row = &s.data[s.offset(l, r, c, 0)];
          for (std::size_t b = 0; b < s.right; ++b) tmp[b] += erc * row[b];
        }
      }
    }
    env.swap(tmp);
  }
  return env[0];
}

DenseMatrix lpmpo_materialize(const LpMpo& lp, const Caps& caps) {
  const std::size_t d = lp.structure().total_dim();
  require_cap(d * d, caps, "lpmpo_materialize");
  const DenseMatrix x = mpo_to_dense(lp.purification(), caps);
  DenseMatrix c = x * x.adjoint();
  // Exact Hermitian symmetrization removes rounding asymmetry of the product.
  return (c + c.adjoint()) * 0.5;
}

cplx lpmpo_sandwich(std::span<const CVector> bra, const LpMpo& lp, std::span<const CVector> ket) {
  const Mpo& x = lp.purification();
  const std::size_t n = x.num_sites();
  if (bra.size() != n || ket.size() != n)
    throw StructuralError("lpmpo_sandwich: expected " + std::to_string(n) + " local vectors");
  // env(b, b̄) couples the bond of the bra half (X) with the bond of the ket half (X†).
  DenseMatrix env = DenseMatrix::Ones(1, 1);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = x.site(k);
    if (static_cast<std::size_t>(bra[k].size()) != s.rows ||
        static_cast<std::size_t>(ket[k].size()) != s.rows)
      throw StructuralError("lpmpo_sandwich: local vector dimension mismatch at site " +
                            std::to_string(k));
    // u_q = Σ_r conj(bra_r) X[., r, q, .],  w_q = Σ_c ket_c conj(X[., c, q, .])
    std::vector<DenseMatrix> u(s.cols, DenseMatrix::Zero(s.left, s.right));
    std::vector<DenseMatrix> w(s.cols, DenseMatrix::Zero(s.left, s.right));
    for (std::size_t l = 0; l < s.left; ++l)
      for (std::size_t r = 0; r < s.rows; ++r) {
        const cplx br = std::conj(bra[k](r));
        const cplx kt = ket[k](r);
        for (std::size_t q = 0; q < s.cols; ++q)
          for (std::size_t b = 0; b < s.right; ++b) {
            const cplx val = s(l, r, q, b);
            u[q](l, b) += br * val;
            w[q](l, b) += kt * std::conj(val);
          }
      }
    DenseMatrix next = DenseMatrix::Zero(s.right, s.right);
    for (std::size_t q = 0; q < s.cols; ++q) next += u[q].transpose() * env * w[q];
    env = std::move(next);
  }
  return env(0, 0);
}

std::vector<std::size_t> vertical_leg_permutation(const SiteStructure& structure) {
  const std::size_t n = structure.num_sites();
  const std::size_t dim = structure.total_dim();
  const auto& d = structure.dims();
  // Interleaved contribution of a site-k digit pair: (ia*d + ib) * ∏_{m>k} d_m².
  std::vector<std::size_t> wa(dim, 0), wb(dim, 0);
  for (std::size_t i = 0; i < dim; ++i) {
    std::size_t rem = i, acc_a = 0, acc_b = 0, stride = 1;
    for (std::size_t k = n; k-- > 0;) {
      const std::size_t digit = rem % d[k];
      rem /= d[k];
      acc_a += digit * d[k] * stride;
      acc_b += digit * stride;
      stride *= d[k] * d[k];
    }
    wa[i] = acc_a;
    wb[i] = acc_b;
  }
  std::vector<std::size_t> perm(dim * dim);
  for (std::size_t ia = 0; ia < dim; ++ia)
    for (std::size_t ib = 0; ib < dim; ++ib) perm[ia * dim + ib] = wa[ia] + wb[ib];
  return perm;
}

DenseMatrix vertical_tensor_product(const DenseMatrix& a, const DenseMatrix& b,
                                    const SiteStructure& structure) {
  const std::size_t dim = structure.total_dim();
  auto square_of = [dim](const DenseMatrix& m) {
    return static_cast<std::size_t>(m.rows()) == dim && static_cast<std::size_t>(m.cols()) == dim;
  };
  if (!square_of(a) || !square_of(b))
    throw StructuralError("vertical_tensor_product: operands must be " + std::to_string(dim) +
                          "x" + std::to_string(dim));
  const auto perm = vertical_leg_permutation(structure);
  DenseMatrix out(dim * dim, dim * dim);
  for (std::size_t ia = 0; ia < dim; ++ia)
    for (std::size_t ja = 0; ja < dim; ++ja) {
      const cplx av = a(ia, ja);
      for (std::size_t ib = 0; ib < dim; ++ib) {
        const std::size_t row = perm[ia * dim + ib];
        for (std::size_t jb = 0; jb < dim; ++jb) out(row, perm[ja * dim + jb]) = av * b(ib, jb);
      }
    }
  return out;
}

DenseMatrix hadamard_product(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw StructuralError("hadamard_product: dimension mismatch");
  return a.cwiseProduct(b);
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CVector kron(const CVector& a, const CVector& b) {
  CVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

CVector kron_all(std::span<const CVector> factors) {
  CVector out = CVector::Ones(1);
  for (const auto& f : factors) out = kron(out, f);
  return out;
}

DenseMatrix apply_site_maps(std::span<const DenseMatrix> factors, const SiteStructure& rows,
                            const DenseMatrix& m) {
  if (factors.size() != rows.num_sites())
    throw StructuralError("apply_site_maps: one factor per site required");
  if (static_cast<std::size_t>(m.rows()) != rows.total_dim())
    throw StructuralError("apply_site_maps: row dimension mismatch");
  // Current layout: rows = (out_0..out_{k-1}, in_k..in_{N-1}); apply factor k to digit k.
  const std::size_t cols = static_cast<std::size_t>(m.cols());
  std::vector<std::size_t> cur_dims = rows.dims();
  DenseMatrix cur = m;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto& f = factors[k];
    if (static_cast<std::size_t>(f.cols()) != cur_dims[k])
      throw StructuralError("apply_site_maps: factor " + std::to_string(k) + " has wrong width");
    std::size_t pre = 1, post = 1;
    for (std::size_t j = 0; j < k; ++j) pre *= cur_dims[j];
    for (std::size_t j = k + 1; j < cur_dims.size(); ++j) post *= cur_dims[j];
    const std::size_t din = cur_dims[k];
    const std::size_t dout = static_cast<std::size_t>(f.rows());
    DenseMatrix next = DenseMatrix::Zero(pre * dout * post, cols);
    for (std::size_t p = 0; p < pre; ++p)
      for (std::size_t o = 0; o < dout; ++o)
        for (std::size_t i = 0; i < din; ++i) {
          const cplx fv = f(o, i);
          if (fv == cplx{}) continue;
          next.middleRows((p * dout + o) * post, post) += fv * cur.middleRows((p * din + i) * post, post);
        }
    cur = std::move(next);
    cur_dims[k] = dout;
  }
  return cur;
}

double max_abs(const DenseMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double hermiticity_defect(const DenseMatrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  const double scale = max_abs(m);
  if (scale == 0.0) return 0.0;
  return max_abs(m - m.adjoint()) / scale;
}

double min_eigenvalue(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw StructuralError("min_eigenvalue: matrix must be square");
  const DenseMatrix h = (m + m.adjoint()) * 0.5;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

bool is_psd(const DenseMatrix& m, double rel_tol) {
  const double tr = std::abs(m.trace().real());
  return min_eigenvalue(m) >= -rel_tol * std::max(tr, 1e-300);
}

}  // namespace etklab
