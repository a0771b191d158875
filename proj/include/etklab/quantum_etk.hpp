#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "etklab/caps.hpp"
#include "etklab/etk.hpp"
#include "etklab/feature_maps.hpp"
#include "etklab/tensor_core.hpp"

namespace etklab {

/// U(x) = S_L(x) W_L ⋯ S_1(x) W_1 with S_j(x) = ⊗_k exp(−i φ_jk(x) Z_k / 2).
/// Qubit 0 is the most significant bit of the computational-basis index.
class StandardFormCircuit {
 public:
  StandardFormCircuit(std::size_t qubits, std::vector<DenseMatrix> fixed_unitaries,
                      std::vector<std::vector<PreprocessingFn>> encodings);

  std::size_t qubits() const { return n_; }
  std::size_t layers() const { return w_.size(); }
  std::size_t num_sites() const { return n_ * w_.size(); }
  std::size_t data_dim() const { return data_dim_; }
  const std::vector<DenseMatrix>& fixed_unitaries() const { return w_; }
  const std::vector<std::vector<PreprocessingFn>>& encodings() const { return phi_; }

  /// Flattened feature set, site k = j·n + qubit.
  LocalFeatureSet feature_set() const;
  /// Diagonal of S_j(x).
  CVector encoding_diagonal(std::size_t layer, std::span<const double> x) const;
  /// U(x)|0…0⟩.
  CVector state(std::span<const double> x, const Caps& caps = default_caps()) const;

 private:
  std::size_t n_;
  std::vector<DenseMatrix> w_;
  std::vector<std::vector<PreprocessingFn>> phi_;
  std::size_t data_dim_ = 0;
};

/// |⟨0|U†(x) U(x′)|0⟩|² by statevector simulation.
double simulate_kernel(const StandardFormCircuit& circ, std::span<const double> x,
                       std::span<const double> xp, const Caps& caps = default_caps());

DenseMatrix build_O_prime(const StandardFormCircuit& circ, const Caps& caps = {});
DenseMatrix build_rho(const StandardFormCircuit& circ, const Caps& caps = {});
/// A = O′ ⊙ ρ^T on 2^N.
DenseMatrix build_A(const StandardFormCircuit& circ, const Caps& caps = {});

enum class CoreRoute { Dense, Ptm };

/// C_T (3^N x 3^N). Dense route forms C = A^T ⊗_v A and compresses it with ⊗P;
/// PTM route evaluates 2^N Tr[σ_i A σ_j A] over σ ∈ {I, X, Y}^N.
DenseMatrix build_core_CT(const StandardFormCircuit& circ, CoreRoute route, const Caps& caps = {});
DenseMatrix core_CT_from_A(const DenseMatrix& a, std::size_t sites, CoreRoute route, const Caps& caps = {});

struct ExtractionArtifacts {
  DenseMatrix o_prime;
  DenseMatrix rho;
  DenseMatrix a;
  std::optional<DenseMatrix> c;  // only on the dense route
  DenseMatrix c_t;
  SiteStructure structure;      // 3 per site
};

ExtractionArtifacts extract(const StandardFormCircuit& circ, CoreRoute route, const Caps& caps = {});

/// ETK with T-basis local maps and the (real, symmetrized) core C_T.
EtkKernel etk_from_circuit(const StandardFormCircuit& circ, CoreRoute route = CoreRoute::Ptm,
                           const Caps& caps = {});

/// Single-qubit matrices used by tests and examples.
DenseMatrix hadamard();
/// Unnormalized |Φ⟩⟨Φ| = Σ_ij |ii⟩⟨jj| on two copies of a dim-dimensional space.
DenseMatrix max_entangled_projector(std::size_t dim);

}  // namespace etklab
