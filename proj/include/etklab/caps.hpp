#pragma once

#include <cstddef>

namespace etklab {

// Size limits for the operations that materialize exponentially large
// objects. All operations take a Caps by value so callers can override them.
struct Caps {
  // Max number of entries of any dense matrix built from a tensor network.
  std::size_t dense_entries = std::size_t{1} << 20;  // 4^10
  // Max qubit count for statevector simulation.
  std::size_t statevector_qubits = 12;
  // Max ETK site count for the dense (4^N) extraction route.
  std::size_t dense_route_sites = 5;
  // Max ETK site count for the Pauli-transfer-matrix (3^N) route.
  std::size_t ptm_route_sites = 7;
  // Max qubit count for the closed-form single-layer spectrum.
  std::size_t spectrum_qubits = 8;
};

/// Default caps with ETKLAB_CAP_QUBITS applied when set.
Caps default_caps();

}  // namespace etklab
