#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "etklab/caps.hpp"
#include "etklab/mercer.hpp"
#include "etklab/rng.hpp"
#include "etklab/tensor_core.hpp"

namespace etklab {

/// Haar-random unitary on `dim` dimensions (Ginibre QR with phase fix).
DenseMatrix haar_unitary(std::size_t dim, Rng& rng);
/// Haar-random unitary on n qubits.
DenseMatrix haar_unitary(std::size_t n, std::uint64_t seed);

/// Unitary W with W|0⟩ = ψ: e^{iθ} times a Householder reflection, θ = arg ψ₀.
DenseMatrix unitary_from_state(const CVector& psi);

struct PreEncodingState {
  enum class Provenance { Haar, Concentrated, Explicit };
  std::size_t n = 0;
  CVector psi;
  Provenance provenance = Provenance::Explicit;
  std::size_t s = 0;
  double eps = 0.0;
  std::vector<std::size_t> support;
  std::uint64_t seed = 0;
  DenseMatrix w;  // W|0…0⟩ = ψ

  /// |ψ_i|².
  std::vector<double> probabilities() const;
};

PreEncodingState haar_state(std::size_t n, Rng& rng);
/// ≥ 1 − ε of the mass on s random indices, Dirichlet(1,…,1) weights on the support,
/// the remaining ε spread evenly over the complement, random phases throughout.
PreEncodingState concentrated_state(std::size_t n, std::size_t s, double eps, Rng& rng);
PreEncodingState concentrated_state(std::size_t n, std::size_t s, double eps, std::uint64_t seed);

/// One term of the single-layer kernel: α ∈ {00, 01, 10}^n written as 2n bits.
struct FrequencyTerm {
  std::string alpha;
  std::vector<int> omega;  // 00 → 0, 01 → +1, 10 → −1
  double eigenvalue = 0.0;
};

/// All 3^n terms, α in lexicographic order (qubit 0 first).
std::vector<FrequencyTerm> single_layer_spectrum(std::span<const double> psi2, const Caps& caps = {});

/// Bit strings in {00,01,10,11}^n matching α with every 00 slot completed by 00 or 11.
std::vector<std::string> index_set(const std::string& alpha);
/// ᾱ: 01 ↔ 10 per slot.
std::string conjugate_alpha(const std::string& alpha);

/// Mercer decomposition over {1, √2 cos ω·x, √2 sin ω·x} on [−π, π]^n.
MercerDecomposition spectrum_to_mercer(const std::vector<FrequencyTerm>& terms);

/// Eigenvalues sorted descending.
std::vector<double> sorted_eigenvalues(const std::vector<FrequencyTerm>& terms);

struct ScalingModel {
  enum class Kind { Haar, Concentrated };
  std::string name;
  Kind kind = Kind::Haar;
  std::size_t s = 0;
  double eps = 0.001;

  static ScalingModel haar();
  static ScalingModel concentrated(std::size_t s, double eps = 0.001);
};

struct ScalingConfig {
  std::vector<std::size_t> n_values;
  std::vector<ScalingModel> models;
  std::size_t instances = 30;
  std::uint64_t seed = 0;
  bool keep_spectra = false;
};

struct ScalingCell {
  std::string model;
  std::size_t n = 0;
  std::vector<double> largest;  // per instance
  double mean = 0.0;
  double std = 0.0;             // population standard deviation
  std::vector<std::vector<double>> spectra;  // per instance, when kept
};

struct ScalingResult {
  std::vector<ScalingCell> cells;  // ordered by model, then n
  const ScalingCell* find(const std::string& model, std::size_t n) const;
  /// model,n,instance,largest_eig,mean,std with one aggregate row per cell.
  std::string to_csv() const;
};

/// Cells with s > 2^n are skipped.
ScalingResult eigenvalue_scaling_experiment(const ScalingConfig& cfg, const Caps& caps = {});

/// rank,eigenvalue
std::string spectrum_rank_csv(std::span<const double> eigenvalues);

/// Stable 64-bit id of a model name, used to derive per-instance RNG streams.
std::uint64_t model_stream_id(const std::string& name);

}  // namespace etklab
