#include "doctest.h"

#include <random>

#include "etklab/errors.hpp"
#include "etklab/tensor_core.hpp"
#include "test_util.hpp"

using namespace etklab;
using namespace testutil;

namespace {

// Full contraction written as ⟨⊗bra| M |⊗ket⟩ on the materialized space.
cplx dense_sandwich(const std::vector<CVector>& bra, const DenseMatrix& m, const std::vector<CVector>& ket) {
  return kron_all(bra).dot(m * kron_all(ket));
}

std::vector<CVector> random_locals(std::mt19937_64& rng, const SiteStructure& s) {
  std::vector<CVector> out;
  for (auto d : s.dims()) out.push_back(random_vector(rng, d));
  return out;
}

}  // namespace

TEST_CASE("kron matches the index formula") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> dim(1, 4);
    const DenseMatrix a = random_matrix(rng, dim(rng), dim(rng));
    const DenseMatrix b = random_matrix(rng, dim(rng), dim(rng));
    CHECK(max_abs(kron(a, b) - naive_kron(a, b)) < 1e-14);
  }
}

TEST_CASE("mpo round trip is exact at zero tolerance") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 25; ++trial) {
    const SiteStructure s = random_structure(rng, 4, 3);
    const std::size_t d = s.total_dim();
    const DenseMatrix m = random_matrix(rng, d, d);
    const Mpo mpo = mpo_from_dense(m, s, 0.0);
    CHECK(mpo.row_structure() == s);
    const DenseMatrix back = mpo_to_dense(mpo);
    CHECK(max_abs(back - m) <= 1e-10 * std::max(1.0, max_abs(m)));
  }
}

TEST_CASE("product operators compress to bond dimension one") {
  std::mt19937_64 rng(3);
  std::vector<DenseMatrix> f{random_matrix(rng, 2, 2), random_matrix(rng, 3, 3), random_matrix(rng, 2, 2)};
  const DenseMatrix m = kron(kron(f[0], f[1]), f[2]);
  const Mpo mpo = mpo_from_dense(m, SiteStructure({2, 3, 2}), 0.0);
  CHECK(mpo.max_bond() == 1);
  CHECK(max_abs(mpo_to_dense(Mpo::product(f)) - m) < 1e-12);
}

TEST_CASE("truncation error is bounded by the tolerance") {
  std::mt19937_64 rng(4);
  const SiteStructure s = SiteStructure::uniform(4, 2);
  for (double tol : {1e-1, 1e-2, 1e-3}) {
    const DenseMatrix m = random_matrix(rng, 16, 16);
    const DenseMatrix back = mpo_to_dense(mpo_from_dense(m, s, tol));
    CHECK((back - m).norm() <= tol * m.norm() * (1 + 1e-9));
  }
}

TEST_CASE("mpo_from_dense rejects mismatched shapes") {
  CHECK_THROWS_AS(mpo_from_dense(DenseMatrix::Identity(5, 5), SiteStructure::uniform(2, 2), 0.0), StructuralError);
  CHECK_THROWS_AS(mpo_from_dense(DenseMatrix::Identity(4, 4), SiteStructure::uniform(2, 2), -1.0), ValidationError);
}

TEST_CASE("sandwich contraction agrees with dense contraction") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const SiteStructure s = random_structure(rng, 4, 3);
    const std::size_t d = s.total_dim();
    const DenseMatrix m = random_matrix(rng, d, d);
    const auto bra = random_locals(rng, s);
    const auto ket = random_locals(rng, s);
    const cplx ref = dense_sandwich(bra, m, ket);
    const cplx got = sandwich_contract(bra, mpo_from_dense(m, s, 0.0), ket);
    CHECK(std::abs(got - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("lpmpo materializes as X X dagger and is PSD") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 15; ++trial) {
    std::uniform_int_distribution<std::size_t> ns(1, 3), ds(1, 3), bs(1, 3);
    const std::size_t n = ns(rng);
    std::vector<SiteTensor> sites;
    std::size_t left = 1;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t right = k + 1 == n ? 1 : bs(rng);
      SiteTensor t(left, ds(rng), ds(rng), right);
      for (auto& v : t.data) v = random_matrix(rng, 1, 1)(0, 0);
      sites.push_back(t);
      left = right;
    }
    const LpMpo lp(sites);
    const DenseMatrix x = mpo_to_dense(lp.purification());
    const DenseMatrix c = lpmpo_materialize(lp);
    CHECK(max_abs(c - x * x.adjoint()) <= 1e-10 * max_abs(c));
    CHECK(is_psd(c));
    const auto bra = random_locals(rng, lp.structure());
    const auto ket = random_locals(rng, lp.structure());
    const cplx ref = dense_sandwich(bra, c, ket);
    CHECK(std::abs(lpmpo_sandwich(bra, lp, ket) - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("vertical tensor product of product operators factorizes per site") {
  std::mt19937_64 rng(7);
  const SiteStructure s({2, 3});
  const DenseMatrix a0 = random_matrix(rng, 2, 2), a1 = random_matrix(rng, 3, 3);
  const DenseMatrix b0 = random_matrix(rng, 2, 2), b1 = random_matrix(rng, 3, 3);
  const DenseMatrix v = vertical_tensor_product(kron(a0, a1), kron(b0, b1), s);
  CHECK(max_abs(v - kron(kron(a0, b0), kron(a1, b1))) < 1e-12);
}

TEST_CASE("vertical tensor product is a conjugated Kronecker product") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const SiteStructure s = random_structure(rng, 3, 2);
    const std::size_t d = s.total_dim();
    const DenseMatrix a = random_matrix(rng, d, d), b = random_matrix(rng, d, d);
    const auto perm = vertical_leg_permutation(s);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(static_cast<Eigen::Index>(d * d));
    for (std::size_t i = 0; i < perm.size(); ++i) p.indices()(i) = static_cast<int>(perm[i]);
    const DenseMatrix pk = p * kron(a, b) * p.transpose();
    CHECK(max_abs(vertical_tensor_product(a, b, s) - pk) < 1e-12);
  }
}

TEST_CASE("hadamard product of PSD matrices is PSD") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const DenseMatrix a = random_psd(rng, 6, 2), b = random_psd(rng, 6, 3);
    CHECK(is_psd(hadamard_product(a, b)));
  }
  CHECK_THROWS_AS(hadamard_product(DenseMatrix::Zero(2, 2), DenseMatrix::Zero(3, 2)), StructuralError);
}

TEST_CASE("apply_site_maps equals multiplication by the Kronecker product") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const SiteStructure s = random_structure(rng, 3, 3);
    std::vector<DenseMatrix> f;
    DenseMatrix full = DenseMatrix::Ones(1, 1);
    for (auto d : s.dims()) {
      f.push_back(random_matrix(rng, 1 + rng() % 3, d));
      full = naive_kron(full, f.back());
    }
    const DenseMatrix m = random_matrix(rng, s.total_dim(), 4);
    CHECK(max_abs(apply_site_maps(f, s, m) - full * m) < 1e-10);
  }
}

TEST_CASE("dense caps are enforced") {
  Caps caps = default_caps();
  caps.dense_entries = 15;
  CHECK_THROWS_AS(mpo_to_dense(Mpo::identity(SiteStructure::uniform(2, 2)), caps), ResourceError);
}
