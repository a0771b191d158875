#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "etklab/tensor_core.hpp"

namespace etklab {

/// Scalar pre-processing φ: ℝ^d → ℝ feeding one Z-rotation of an encoding layer.
class PreprocessingFn {
 public:
  enum class Kind { Coordinate, Affine, Zero };

  static PreprocessingFn coordinate(std::size_t index, std::size_t input_dim);
  static PreprocessingFn affine(std::vector<double> weights, double bias);
  static PreprocessingFn zero(std::size_t input_dim);

  Kind kind() const { return kind_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t index() const { return index_; }
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

  double operator()(std::span<const double> x) const;

  /// Dense weight vector w with φ(x) = w·x + b.
  std::vector<double> as_affine_weights() const;
  /// True when φ(x) = w·x + b with integer w, so e^{±iφ} is a trigonometric monomial.
  bool has_integer_frequencies() const;

  bool operator==(const PreprocessingFn&) const = default;

 private:
  Kind kind_ = Kind::Zero;
  std::size_t input_dim_ = 0;
  std::size_t index_ = 0;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

/// Flattened list of N = nL pre-processing functions, k = j·n + qubit.
struct LocalFeatureSet {
  std::vector<PreprocessingFn> maps;

  std::size_t size() const { return maps.size(); }
  /// Shared input dimension; throws StructuralError if the maps disagree.
  std::size_t input_dim() const;
};

enum class LocalBasis { T, E };

/// (1, cos φ, sin φ)/√2.
std::array<double, 3> eval_local_T(const PreprocessingFn& fn, std::span<const double> x);
/// (1, e^{iφ}, e^{−iφ}, 1).
std::array<cplx, 4> eval_local_E(const PreprocessingFn& fn, std::span<const double> x);
/// Isometry P (4x3) with columns vec(I), vec(X), vec(Y) over √2, so that E = 2 P T.
DenseMatrix isometry_P();

/// Local vectors of the product feature ⊗_k F^(k)(x); the product itself is never formed.
std::vector<CVector> eval_product_feature(const LocalFeatureSet& set, std::span<const double> x,
                                          LocalBasis basis);

/// Finite Fourier series Σ_ω a_ω e^{i ω·x} with integer frequency vectors.
using FourierSeries = std::map<std::vector<int>, cplx>;

FourierSeries fourier_constant(std::size_t dim, cplx value);
FourierSeries fourier_product(const FourierSeries& a, const FourierSeries& b);
/// ⟨f, g⟩ = (2π)^{−d} ∫_{[−π,π]^d} conj(f) g dx = Σ_ω conj(a_ω) b_ω.
cplx fourier_inner(const FourierSeries& f, const FourierSeries& g);
cplx fourier_eval(const FourierSeries& f, std::span<const double> x);

/// Fourier expansions of the T (3 entries) or E (4 entries) components; empty if
/// φ has non-integer frequencies.
std::optional<std::vector<FourierSeries>> local_fourier(const PreprocessingFn& fn, LocalBasis basis);

}  // namespace etklab
