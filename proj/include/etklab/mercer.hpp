#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etklab/etk.hpp"
#include "etklab/feature_maps.hpp"
#include "etklab/tensor_core.hpp"

namespace etklab {

/// How ⟨f, g⟩ = E_μ[f̄ g] is computed; μ is uniform on [−π, π]^d in every case.
enum class InnerProductKind { AnalyticFourier, Quadrature, MonteCarlo };

struct GramReport {
  DenseMatrix gram;         // G_ij = ⟨F_i, F_j⟩
  double max_stderr = 0.0;  // Monte Carlo standard error (0 otherwise)
};

/// A finite family of component functions F_i: ℝ^d → ℂ with an inner-product provider.
class FunctionBasis {
 public:
  using Evaluator = std::function<CVector(std::span<const double>)>;

  /// Numeric basis; defaults to Gauss–Legendre quadrature (d ≤ 3) or Monte Carlo.
  FunctionBasis(std::size_t size, std::size_t data_dim, Evaluator eval, std::string description);
  /// Finite trigonometric polynomials; inner products are exact.
  static FunctionBasis fourier(std::vector<FourierSeries> components, std::string description);
  /// Components of the product feature |F(x)⟩ of an ETK.
  static FunctionBasis from_kernel(const EtkKernel& kernel);

  FunctionBasis with_quadrature(std::size_t nodes_per_dim = 32) const;
  FunctionBasis with_monte_carlo(std::size_t samples, std::uint64_t seed) const;

  std::size_t size() const { return size_; }
  std::size_t data_dim() const { return data_dim_; }
  InnerProductKind provider() const { return kind_; }
  const std::string& description() const { return description_; }
  const std::optional<std::vector<FourierSeries>>& series() const { return series_; }
  std::size_t quadrature_nodes() const { return nodes_; }
  std::size_t mc_samples() const { return samples_; }
  std::uint64_t mc_seed() const { return seed_; }

  CVector eval(std::span<const double> x) const { return eval_(x); }
  GramReport gram() const;
  /// Φ (M x size) with G = Φ† Φ: Fourier coefficients, √w-weighted nodes or scaled samples.
  DenseMatrix coordinates() const;

 private:
  std::size_t size_ = 0;
  std::size_t data_dim_ = 0;
  Evaluator eval_;
  std::string description_;
  std::optional<std::vector<FourierSeries>> series_;
  InnerProductKind kind_ = InnerProductKind::Quadrature;
  std::size_t nodes_ = 32;
  std::size_t samples_ = 100000;
  std::uint64_t seed_ = 0;
};

struct GramSchmidtResult {
  std::size_t rank = 0;
  std::vector<std::size_t> independent;  // original indices, in order
  std::vector<std::size_t> dependent;
  DenseMatrix l_tilde;  // rank x rank lower-triangular over the independent components
  DenseMatrix alpha;    // (d − rank) x rank: F_dep = α F_indep
};

/// Orthonormalizes the components using only their Gram matrix (two passes).
/// Residual norms carry ~√ε relative error on this path.
GramSchmidtResult gram_schmidt_basis(const DenseMatrix& gram, double dep_tol = 1e-8);
/// Same recursion carried out on the coordinate columns of the basis (full precision).
GramSchmidtResult gram_schmidt_basis(const FunctionBasis& basis, double dep_tol = 1e-8);

/// d x d invertible L in the original component order with L F = (e_1, …, e_d̃, 0, …, 0).
DenseMatrix pad_L(const GramSchmidtResult& gs);

struct TransformResult {
  DenseMatrix c_tilde;  // d̃ x d̃
  double condition = 1.0;
  bool ill_conditioned = false;  // cond(L) > 1e12
};

/// Upper-left d̃ block of (L^{-1})† C L^{-1}.
TransformResult transform_truncate(const DenseMatrix& c, const DenseMatrix& l, std::size_t rank);

struct MercerDecomposition {
  std::vector<double> eigenvalues;  // non-increasing
  DenseMatrix u;                    // rows are eigenvectors over {ẽ_i}
  DenseMatrix coefficients;         // ê = coefficients · F
  std::size_t rank = 0;
  std::string basis;
  std::vector<std::string> labels;
  std::vector<std::string> warnings;
  std::shared_ptr<const FunctionBasis> functions;

  /// ê_i(x) for all i.
  CVector eigenfunctions(std::span<const double> x) const;
};

/// Eigendecomposition of a Hermitian C̃; U = V† with eigenvalues sorted descending.
MercerDecomposition diagonalize(const DenseMatrix& c_tilde);

/// Σ_i γ_i conj(ê_i(x)) ê_i(x′).
double reconstruct_kernel(const MercerDecomposition& dec, std::span<const double> x,
                          std::span<const double> xp);
cplx reconstruct_kernel_complex(const MercerDecomposition& dec, std::span<const double> x,
                                std::span<const double> xp);

/// ⟨ê_i, ê_j⟩ under the given basis provider.
DenseMatrix eigenfunction_gram(const MercerDecomposition& dec, const FunctionBasis& basis);

struct MercerOptions {
  double dep_tol = 1e-8;
  std::optional<InnerProductKind> provider;
  std::size_t quadrature_nodes = 32;
  std::size_t mc_samples = 100000;
  std::uint64_t mc_seed = 0;
};

MercerDecomposition mercer_decompose(const FunctionBasis& basis, const DenseMatrix& core,
                                     const MercerOptions& opts = {});
MercerDecomposition mercer_decompose(const EtkKernel& kernel, const MercerOptions& opts = {},
                                     const Caps& caps = {});

std::string mercer_to_json(const MercerDecomposition& dec);
/// index,eigenvalue
std::string spectrum_to_csv(std::span<const double> eigenvalues);

}  // namespace etklab
