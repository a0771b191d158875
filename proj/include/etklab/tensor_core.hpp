#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "etklab/caps.hpp"

namespace etklab {

using cplx = std::complex<double>;
using DenseMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Per-site local dimensions of a tensor-product space. Site 0 is the most
/// significant digit of the flattened (standard Kronecker) index.
class SiteStructure {
 public:
  SiteStructure() = default;
  explicit SiteStructure(std::vector<std::size_t> local_dims);
  static SiteStructure uniform(std::size_t num_sites, std::size_t dim);

  std::size_t num_sites() const { return dims_.size(); }
  std::size_t dim(std::size_t k) const { return dims_[k]; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t total_dim() const;

  bool operator==(const SiteStructure&) const = default;

 private:
  std::vector<std::size_t> dims_;
};

/// Dense 4-index tensor (left bond, row, col, right bond), row-major.
struct SiteTensor {
  std::size_t left = 1, rows = 1, cols = 1, right = 1;
  std::vector<cplx> data;

  SiteTensor() = default;
  SiteTensor(std::size_t l, std::size_t r, std::size_t c, std::size_t rr);

  std::size_t offset(std::size_t l, std::size_t r, std::size_t c, std::size_t rr) const {
    return ((l * rows + r) * cols + c) * right + rr;
  }
  cplx& operator()(std::size_t l, std::size_t r, std::size_t c, std::size_t rr) {
    return data[offset(l, r, c, rr)];
  }
  const cplx& operator()(std::size_t l, std::size_t r, std::size_t c, std::size_t rr) const {
    return data[offset(l, r, c, rr)];
  }
  /// Physical slice (rows x cols) at fixed bond indices.
  DenseMatrix slice(std::size_t l, std::size_t rr) const;
  static SiteTensor from_matrix(const DenseMatrix& m);
};

/// Matrix product operator. Boundary bonds have dimension 1.
class Mpo {
 public:
  Mpo() = default;
  explicit Mpo(std::vector<SiteTensor> sites);

  std::size_t num_sites() const { return sites_.size(); }
  const SiteTensor& site(std::size_t k) const { return sites_[k]; }
  const std::vector<SiteTensor>& sites() const { return sites_; }
  SiteStructure row_structure() const;
  SiteStructure col_structure() const;
  std::size_t max_bond() const;

  /// Bond-dimension-1 MPO with the given site matrices, i.e. their Kronecker product.
  static Mpo product(std::span<const DenseMatrix> factors);
  static Mpo identity(const SiteStructure& s);

 private:
  std::vector<SiteTensor> sites_;
};

/// Locally purified MPO: sites of X with (left, d, p, right); the operator is C = X X†.
class LpMpo {
 public:
  LpMpo() = default;
  explicit LpMpo(std::vector<SiteTensor> sites);

  std::size_t num_sites() const { return x_.num_sites(); }
  const Mpo& purification() const { return x_; }
  SiteStructure structure() const { return x_.row_structure(); }
  std::size_t max_bond() const { return x_.max_bond(); }

  static LpMpo identity(const SiteStructure& s);

 private:
  Mpo x_;
};

Mpo mpo_from_dense(const DenseMatrix& matrix, const SiteStructure& structure, double trunc_tol);
DenseMatrix mpo_to_dense(const Mpo& mpo, const Caps& caps = {});

/// ⟨⊗bra| C |⊗ket⟩ by a left-to-right sweep; O(N d² χ²).
cplx sandwich_contract(std::span<const CVector> bra, const Mpo& core, std::span<const CVector> ket);

DenseMatrix lpmpo_materialize(const LpMpo& lp, const Caps& caps = {});

/// ⟨⊗bra| X X† |⊗ket⟩ contracting the bra and ket halves against X and
/// sweeping the purification legs; O(N χ³ (d + p)).
cplx lpmpo_sandwich(std::span<const CVector> bra, const LpMpo& lp, std::span<const CVector> ket);

/// Vertical tensor product a ⊗_v b. Site k of the result has local dimension
/// d_k² with local index (i_a * d_k + i_b): odd legs from a, even legs from b.
DenseMatrix vertical_tensor_product(const DenseMatrix& a, const DenseMatrix& b,
                                    const SiteStructure& structure);

/// perm[i_a * D + i_b] is the interleaved index used by vertical_tensor_product,
/// so a ⊗_v b = Π (a ⊗ b) Π^T.
std::vector<std::size_t> vertical_leg_permutation(const SiteStructure& structure);

DenseMatrix hadamard_product(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);
CVector kron(const CVector& a, const CVector& b);
CVector kron_all(std::span<const CVector> factors);

/// (⊗_k F_k) M where F_k is m_k x d_k and the rows of M follow `rows`.
DenseMatrix apply_site_maps(std::span<const DenseMatrix> factors, const SiteStructure& rows,
                            const DenseMatrix& m);

double max_abs(const DenseMatrix& m);
/// max|M − M†| relative to max|M| (0 for the zero matrix).
double hermiticity_defect(const DenseMatrix& m);
/// Smallest eigenvalue of the Hermitian part.
double min_eigenvalue(const DenseMatrix& m);
bool is_psd(const DenseMatrix& m, double rel_tol = 1e-10);

}  // namespace etklab
