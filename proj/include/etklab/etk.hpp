#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "etklab/caps.hpp"
#include "etklab/feature_maps.hpp"
#include "etklab/tensor_core.hpp"

namespace etklab {

/// One local feature map F^(k): ℝ^d → ℂ^{d_k}.
class SiteFeature {
 public:
  enum class Kind {
    Trig,       // (1, cos φ, sin φ)/√2
    Exp,        // (1, e^{iφ}, e^{−iφ}, 1)
    Linear,     // (√c, x_1, …, x_d)
    ShiftExp,   // (e^{−i s x_0}, 1, e^{i s x_0})
    Augmented,  // (1, ⊗_j inner_j(x)) with inner core applied by the owning kernel
  };

  static SiteFeature trig(PreprocessingFn fn);
  static SiteFeature exp(PreprocessingFn fn);
  static SiteFeature linear(double offset, std::size_t data_dim);
  static SiteFeature shift_exp(double scale);
  static SiteFeature augmented(std::vector<SiteFeature> inner);

  Kind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t data_dim() const { return data_dim_; }
  const PreprocessingFn& fn() const { return fn_; }
  double offset() const { return offset_; }
  double scale() const { return scale_; }
  const std::vector<SiteFeature>& inner() const { return inner_; }

  CVector eval(std::span<const double> x) const;
  /// Per-component Fourier expansions, when every component is a finite
  /// trigonometric polynomial in x.
  std::optional<std::vector<FourierSeries>> fourier() const;

 private:
  Kind kind_ = Kind::Trig;
  std::size_t dim_ = 0;
  std::size_t data_dim_ = 0;
  PreprocessingFn fn_;
  double offset_ = 0.0;
  double scale_ = 1.0;
  std::vector<SiteFeature> inner_;
};

struct DenseCore {
  DenseMatrix matrix;
};
struct MpoCore {
  Mpo mpo;
  bool psd_verified = false;
};
struct LpMpoCore {
  LpMpo lp;
};
using CoreTensor = std::variant<DenseCore, MpoCore, LpMpoCore>;

/// Local basis tag used for serialization of kernels built on a LocalFeatureSet.
enum class KernelBasis { T, E, Custom };

enum class PsdStatus { Psd, NotPsd, Unverifiable };

struct PsdReport {
  PsdStatus status = PsdStatus::Unverifiable;
  std::optional<double> min_eigenvalue;  // set when a dense check ran
  std::string reason;
  bool ok() const { return status == PsdStatus::Psd; }
};

/// K_C(x, x′) = ⟨F(x)| C |F(x′)⟩ with F(x) = ⊗_k F^(k)(x).
class EtkKernel {
 public:
  EtkKernel(std::vector<SiteFeature> sites, CoreTensor core, KernelBasis basis = KernelBasis::Custom);

  static EtkKernel from_feature_set(const LocalFeatureSet& set, LocalBasis basis, CoreTensor core);

  std::size_t num_sites() const { return sites_.size(); }
  std::size_t data_dim() const { return data_dim_; }
  const std::vector<SiteFeature>& sites() const { return sites_; }
  const CoreTensor& core() const { return core_; }
  KernelBasis basis() const { return basis_; }
  SiteStructure structure() const;

  std::vector<CVector> local_features(std::span<const double> x) const;
  /// Full product feature |F(x)⟩ (dimension ∏ d_k).
  CVector product_feature(std::span<const double> x) const;

  /// Complex-valued evaluation via the route native to the core representation.
  cplx evaluate_complex(std::span<const double> x, std::span<const double> xp) const;
  /// Real kernel value; throws NumericalError if |Im K| > 1e-10 (relative to max(1, |K|)).
  double evaluate(std::span<const double> x, std::span<const double> xp) const;

  /// Dense core matrix (materializing MPO / LPMPO cores within caps).
  DenseMatrix dense_core(const Caps& caps = {}) const;

 private:
  std::vector<SiteFeature> sites_;
  CoreTensor core_;
  KernelBasis basis_;
  std::size_t data_dim_ = 0;
};

using GramMatrix = DenseMatrix;

/// G_ij = K(x_i, x_j); upper triangle computed in parallel, lower filled by conjugation.
GramMatrix gram_matrix(const EtkKernel& kernel, std::span<const std::vector<double>> xs);
/// Rectangular block G_ij = K(a_i, b_j).
GramMatrix cross_gram(const EtkKernel& kernel, std::span<const std::vector<double>> a,
                      std::span<const std::vector<double>> b);

/// (c + x·x′)^N as N identical sites (√c, x) with an identity core.
EtkKernel polynomial_etk(std::size_t degree, double offset, std::size_t data_dim);
/// Σ_i a_i K_i with one site (1, F_i(x)) per constituent.
EtkKernel linear_sum_etk(std::span<const EtkKernel> kernels, std::span<const double> weights,
                         const Caps& caps = {});
/// γ₀ + Σ_{j≥1} γ_j cos(j (x − x′)) on scalar inputs.
EtkKernel shift_invariant_etk(std::span<const double> coeffs);

PsdReport verify_psd(const EtkKernel& kernel, const Caps& caps = {});

/// Gram rows as CSV with a header row of sample indices.
std::string gram_to_csv(const GramMatrix& g);

}  // namespace etklab
