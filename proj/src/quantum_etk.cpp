#include "etklab/quantum_etk.hpp"

#include <cmath>
#include <string>

#include "etklab/errors.hpp"
#include "etklab/parallel.hpp"

namespace etklab {

namespace {

std::size_t pow_size(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

void require_sites(std::size_t sites, std::size_t cap, const char* what, const char* hint) {
  if (sites > cap)
    throw ResourceError(std::string(what) + ": " + std::to_string(sites) + " sites exceed the cap of " +
                        std::to_string(cap) + "; " + hint);
}

DenseMatrix ket0_projector(std::size_t dim) {
  DenseMatrix p = DenseMatrix::Zero(dim, dim);
  p(0, 0) = 1.0;
  return p;
}

DenseMatrix kron_list(const std::vector<DenseMatrix>& factors) {
  DenseMatrix out = DenseMatrix::Ones(1, 1);
  for (const auto& f : factors) out = kron(out, f);
  return out;
}

}  // namespace

DenseMatrix hadamard() {
  DenseMatrix h(2, 2);
  h << 1.0, 1.0, 1.0, -1.0;
  return h / std::sqrt(2.0);
}

DenseMatrix max_entangled_projector(std::size_t dim) {
  CVector phi = CVector::Zero(dim * dim);
  for (std::size_t i = 0; i < dim; ++i) phi(i * dim + i) = 1.0;
  return phi * phi.adjoint();
}

StandardFormCircuit::StandardFormCircuit(std::size_t qubits, std::vector<DenseMatrix> fixed_unitaries,
                                         std::vector<std::vector<PreprocessingFn>> encodings)
    : n_(qubits), w_(std::move(fixed_unitaries)), phi_(std::move(encodings)) {
  if (n_ == 0) throw ValidationError("circuit needs at least one qubit");
  if (w_.empty()) throw ValidationError("circuit needs at least one layer");
  if (phi_.size() != w_.size())
    throw StructuralError("circuit has " + std::to_string(w_.size()) + " fixed unitaries but " +
                          std::to_string(phi_.size()) + " encoding layers");
  const auto dim = static_cast<Eigen::Index>(pow_size(2, n_));
  for (std::size_t j = 0; j < w_.size(); ++j) {
    const auto& w = w_[j];
    if (w.rows() != dim || w.cols() != dim)
      throw StructuralError("W_" + std::to_string(j + 1) + " must be " + std::to_string(dim) + "x" +
                            std::to_string(dim));
    const double defect = max_abs(w.adjoint() * w - DenseMatrix::Identity(dim, dim));
    if (defect > 1e-12)
      throw ValidationError("W_" + std::to_string(j + 1) + " is not unitary (defect " + std::to_string(defect) + ")");
    if (phi_[j].size() != n_)
      throw StructuralError("encoding layer " + std::to_string(j + 1) + " needs one map per qubit");
  }
  data_dim_ = phi_.front().front().input_dim();
  for (const auto& layer : phi_)
    for (const auto& f : layer)
      if (f.input_dim() != data_dim_) throw StructuralError("encoding maps disagree on the input dimension");
}

LocalFeatureSet StandardFormCircuit::feature_set() const {
  LocalFeatureSet set;
  for (const auto& layer : phi_)
    for (const auto& f : layer) set.maps.push_back(f);
  return set;
}

CVector StandardFormCircuit::encoding_diagonal(std::size_t layer, std::span<const double> x) const {
  const std::size_t dim = pow_size(2, n_);
  std::vector<double> phis(n_);
  for (std::size_t k = 0; k < n_; ++k) phis[k] = phi_[layer][k](x);
  CVector diag(dim);
  for (std::size_t z = 0; z < dim; ++z) {
    double angle = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      const bool one = (z >> (n_ - 1 - k)) & 1U;
      angle += one ? 0.5 * phis[k] : -0.5 * phis[k];
    }
    diag(z) = std::polar(1.0, angle);
  }
  return diag;
}

CVector StandardFormCircuit::state(std::span<const double> x, const Caps& caps) const {
  if (n_ > caps.statevector_qubits)
    throw ResourceError("statevector simulation of " + std::to_string(n_) + " qubits exceeds the cap of " +
                        std::to_string(caps.statevector_qubits));
  if (x.size() != data_dim_) throw StructuralError("circuit expects input dimension " + std::to_string(data_dim_));
  CVector psi = CVector::Zero(pow_size(2, n_));
  psi(0) = 1.0;
  for (std::size_t j = 0; j < w_.size(); ++j) {
    psi = w_[j] * psi;
    psi = psi.cwiseProduct(encoding_diagonal(j, x));
  }
  return psi;
}

double simulate_kernel(const StandardFormCircuit& circ, std::span<const double> x, std::span<const double> xp,
                       const Caps& caps) {
  const CVector a = circ.state(x, caps);
  const CVector b = circ.state(xp, caps);
  return std::norm(a.dot(b));
}

DenseMatrix build_O_prime(const StandardFormCircuit& circ, const Caps& caps) {
  const std::size_t n = circ.qubits();
  const std::size_t layers = circ.layers();
  const std::size_t dim = pow_size(2, n);
  const std::size_t total = pow_size(2, n * layers);
  if (total * total > caps.dense_entries)
    throw ResourceError("build_O_prime: 2^N = " + std::to_string(total) + " exceeds the dense cap");
  const DenseMatrix id = DenseMatrix::Identity(dim, dim);
  const DenseMatrix phi = max_entangled_projector(dim);
  std::vector<DenseMatrix> factors;
  // Layers (2j−1, 2j) are joined through the Choi-type block of W_{2j}.
  for (std::size_t j = 2; j <= layers; j += 2) {
    const DenseMatrix& w = circ.fixed_unitaries()[j - 1];
    const DenseMatrix left = kron(w.adjoint(), id);
    factors.push_back(left * phi * left.adjoint());
  }
  if (layers % 2 == 1) factors.push_back(id);
  return kron_list(factors);
}

DenseMatrix build_rho(const StandardFormCircuit& circ, const Caps& caps) {
  const std::size_t n = circ.qubits();
  const std::size_t layers = circ.layers();
  const std::size_t dim = pow_size(2, n);
  const std::size_t total = pow_size(2, n * layers);
  if (total * total > caps.dense_entries)
    throw ResourceError("build_rho: 2^N = " + std::to_string(total) + " exceeds the dense cap");
  const DenseMatrix id = DenseMatrix::Identity(dim, dim);
  const DenseMatrix phi = max_entangled_projector(dim);
  const DenseMatrix& w1 = circ.fixed_unitaries()[0];
  std::vector<DenseMatrix> factors{w1 * ket0_projector(dim) * w1.adjoint()};
  // Layers (2j, 2j+1) are joined through W_{2j+1}.
  for (std::size_t j = 3; j <= layers; j += 2) {
    const DenseMatrix& w = circ.fixed_unitaries()[j - 1];
    const DenseMatrix right = kron(id, w);
    factors.push_back(right * phi * right.adjoint());
  }
  if (layers % 2 == 0) factors.push_back(id);
  return kron_list(factors);
}

DenseMatrix build_A(const StandardFormCircuit& circ, const Caps& caps) {
  return hadamard_product(build_O_prime(circ, caps), build_rho(circ, caps).transpose());
}

DenseMatrix core_CT_from_A(const DenseMatrix& a, std::size_t sites, CoreRoute route, const Caps& caps) {
  const std::size_t dim = pow_size(2, sites);
  if (static_cast<std::size_t>(a.rows()) != dim || static_cast<std::size_t>(a.cols()) != dim)
    throw StructuralError("core_CT_from_A: A must be 2^N x 2^N");
  const double scale4 = static_cast<double>(pow_size(4, sites));
  if (route == CoreRoute::Dense) {
    require_sites(sites, caps.dense_route_sites, "dense C_T route", "use the ptm route");
    const SiteStructure qubits = SiteStructure::uniform(sites, 2);
    const DenseMatrix c = vertical_tensor_product(a.transpose(), a, qubits);
    const DenseMatrix p = isometry_P();
    const SiteStructure legs = SiteStructure::uniform(sites, 4);
    const std::vector<DenseMatrix> pa(sites, p.adjoint());
    const std::vector<DenseMatrix> pt(sites, p.transpose());
    const DenseMatrix y = apply_site_maps(pa, legs, c);                  // (⊗P†) C
    const DenseMatrix z = apply_site_maps(pt, legs, y.transpose());      // ((⊗P†) C (⊗P))^T
    return scale4 * z.transpose();
  }
  require_sites(sites, caps.ptm_route_sites, "ptm C_T route", "raise ptm_route_sites or reduce the circuit");
  const std::size_t strings = pow_size(3, sites);
  const cplx i_unit{0.0, 1.0};
  // Pauli string t (base-3 digits, site 0 most significant) acts as σ|z⟩ = phase(z) |z ⊕ mask⟩.
  std::vector<std::size_t> mask(strings, 0);
  std::vector<CVector> phase(strings, CVector::Ones(dim));
  for (std::size_t t = 0; t < strings; ++t) {
    std::size_t rem = t;
    for (std::size_t k = sites; k-- > 0;) {
      const std::size_t digit = rem % 3;
      rem /= 3;
      const std::size_t bit = std::size_t{1} << (sites - 1 - k);
      if (digit == 0) continue;
      mask[t] |= bit;
      if (digit == 2)
        for (std::size_t z = 0; z < dim; ++z) phase[t](z) *= (z & bit) ? -i_unit : i_unit;
    }
  }
  const double scale = scale4 / static_cast<double>(dim);
  DenseMatrix ct(strings, strings);
  parallel_for(strings, [&](std::size_t j) {
    DenseMatrix sa(dim, dim);  // σ_j A
    for (std::size_t r = 0; r < dim; ++r) {
      const std::size_t z = r ^ mask[j];
      sa.row(r) = phase[j](z) * a.row(z);
    }
    const DenseMatrix b = a * sa;
    for (std::size_t i = 0; i < strings; ++i) {
      cplx tr{};
      for (std::size_t z = 0; z < dim; ++z) tr += phase[i](z) * b(z, z ^ mask[i]);
      ct(i, j) = scale * tr;
    }
  });
  return ct;
}

DenseMatrix build_core_CT(const StandardFormCircuit& circ, CoreRoute route, const Caps& caps) {
  const std::size_t sites = circ.num_sites();
  if (route == CoreRoute::Dense)
    require_sites(sites, caps.dense_route_sites, "dense C_T route", "use the ptm route");
  else
    require_sites(sites, caps.ptm_route_sites, "ptm C_T route", "raise ptm_route_sites or reduce the circuit");
  return core_CT_from_A(build_A(circ, caps), sites, route, caps);
}

ExtractionArtifacts extract(const StandardFormCircuit& circ, CoreRoute route, const Caps& caps) {
  const std::size_t sites = circ.num_sites();
  if (route == CoreRoute::Dense)
    require_sites(sites, caps.dense_route_sites, "dense C_T route", "use the ptm route");
  else
    require_sites(sites, caps.ptm_route_sites, "ptm C_T route", "raise ptm_route_sites or reduce the circuit");
  ExtractionArtifacts art;
  art.o_prime = build_O_prime(circ, caps);
  art.rho = build_rho(circ, caps);
  art.a = hadamard_product(art.o_prime, art.rho.transpose());
  if (route == CoreRoute::Dense)
    art.c = vertical_tensor_product(art.a.transpose(), art.a, SiteStructure::uniform(sites, 2));
  art.c_t = core_CT_from_A(art.a, sites, route, caps);
  art.structure = SiteStructure::uniform(sites, 3);
  return art;
}

EtkKernel etk_from_circuit(const StandardFormCircuit& circ, CoreRoute route, const Caps& caps) {
  const DenseMatrix ct = build_core_CT(circ, route, caps);
  const DenseMatrix real = ct.real().cast<cplx>();
  DenseMatrix sym = (real + real.transpose()) * 0.5;
  return EtkKernel::from_feature_set(circ.feature_set(), LocalBasis::T, DenseCore{std::move(sym)});
}

}  // namespace etklab
