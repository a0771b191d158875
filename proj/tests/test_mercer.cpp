#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "etklab/errors.hpp"
#include "etklab/mercer.hpp"
#include "etklab/quantum_etk.hpp"
#include "test_util.hpp"

using namespace etklab;
using namespace testutil;

namespace {

constexpr double kPi = std::numbers::pi;

// Random real-core ETK on `sites` trig sites over d inputs with integer or fractional frequencies.
EtkKernel random_etk(std::mt19937_64& rng, std::size_t sites, std::size_t d, bool integer) {
  LocalFeatureSet set;
  std::uniform_int_distribution<int> wi(-2, 2);
  std::uniform_real_distribution<double> wr(-1.5, 1.5), b(-1, 1);
  for (std::size_t k = 0; k < sites; ++k) {
    std::vector<double> w(d);
    for (auto& v : w) v = integer ? wi(rng) : wr(rng);
    set.maps.push_back(PreprocessingFn::affine(w, b(rng)));
  }
  const std::size_t dim = static_cast<std::size_t>(std::pow(3, sites));
  const DenseMatrix r = random_matrix(rng, dim, 3).real().cast<cplx>();
  return EtkKernel::from_feature_set(set, LocalBasis::T, DenseCore{r * r.transpose()});
}

std::vector<double> sorted_desc(std::vector<double> v) {
  std::sort(v.begin(), v.end(), std::greater<>());
  return v;
}

}  // namespace

TEST_CASE("orthonormal Fourier components give the identity map") {
  std::vector<FourierSeries> comps{{{{0}, 1.0}}, {{{-1}, 1.0}}, {{{1}, 1.0}}};
  const auto basis = FunctionBasis::fourier(comps, "1, e^{-ix}, e^{ix}");
  const auto gs = gram_schmidt_basis(basis.gram().gram);
  CHECK(gs.rank == 3);
  CHECK(max_abs(gs.l_tilde - DenseMatrix::Identity(3, 3)) < 1e-15);
}

TEST_CASE("duplicated component is detected as dependent") {
  std::vector<FourierSeries> comps{{{{1}, 0.7}}, {{{1}, 0.7}}};
  const auto basis = FunctionBasis::fourier(comps, "dup");
  const auto gs = gram_schmidt_basis(basis.gram().gram);
  CHECK(gs.rank == 1);
  REQUIRE(gs.dependent.size() == 1);
  CHECK(gs.dependent[0] == 1);
  const double a = std::abs(gs.alpha(0, 0) * gs.l_tilde(0, 0));
  // F_2 = α F_1 with α = 1.
  CHECK(std::abs(gs.alpha(0, 0) - 1.0) < 1e-12);
  CHECK(a > 0);
  const DenseMatrix l = pad_L(gs);
  std::mt19937_64 rng(41);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_point(rng, 1);
    CHECK(std::abs((l * basis.eval(x))(1)) < 1e-12);
  }
}

TEST_CASE("single-qubit E basis pads with the -1 corner") {
  const auto fn = PreprocessingFn::coordinate(0, 1);
  const EtkKernel k = EtkKernel::from_feature_set(LocalFeatureSet{{fn}}, LocalBasis::E, DenseCore{DenseMatrix::Identity(4, 4)});
  const auto basis = FunctionBasis::from_kernel(k);
  CHECK(basis.provider() == InnerProductKind::AnalyticFourier);
  const auto gs = gram_schmidt_basis(basis.gram().gram);
  CHECK(gs.rank == 3);
  DenseMatrix expect = DenseMatrix::Identity(4, 4);
  expect(3, 0) = -1.0;
  CHECK(max_abs(pad_L(gs) - expect) < 1e-14);
}

TEST_CASE("quadrature Gram-Schmidt orthonormalizes random polynomials") {
  // Exact monomial moments on the uniform measure: E[x^k] = π^k/(k+1) for even k.
  std::mt19937_64 rng(42);
  const int deg = 5;
  DenseMatrix moments(deg + 1, deg + 1);
  for (int a = 0; a <= deg; ++a)
    for (int b = 0; b <= deg; ++b) moments(a, b) = (a + b) % 2 ? 0.0 : std::pow(kPi, a + b) / (a + b + 1);
  for (int trial = 0; trial < 5; ++trial) {
    const DenseMatrix coef = random_matrix(rng, 4, deg + 1);
    FunctionBasis basis(4, 1,
                        [coef](std::span<const double> x) {
                          CVector mono(deg + 1);
                          for (int k = 0; k <= deg; ++k) mono(k) = std::pow(x[0], k);
                          return CVector(coef * mono);
                        },
                        "polynomials");
    const auto q = basis.with_quadrature(32);
    const DenseMatrix g = q.gram().gram;
    const DenseMatrix exact = coef.conjugate() * moments * coef.transpose();
    CHECK(max_abs(g - exact) < 1e-10 * max_abs(exact));
    const auto gs = gram_schmidt_basis(g);
    CHECK(gs.rank == 4);
    const DenseMatrix m = gs.l_tilde;  // e = L̃ F
    const DenseMatrix eg = m.conjugate() * exact * m.transpose();
    CHECK(max_abs(eg - DenseMatrix::Identity(4, 4)) < 1e-8);
  }
}

TEST_CASE("indefinite inner products are rejected") {
  DenseMatrix g = DenseMatrix::Identity(2, 2);
  g(1, 1) = -1.0;
  CHECK_THROWS_AS(gram_schmidt_basis(g), ValidationError);
  CHECK_THROWS_AS(gram_schmidt_basis(DenseMatrix::Identity(2, 2), 0.0), ValidationError);
}

TEST_CASE("transform with identity L is a truncation") {
  std::mt19937_64 rng(43);
  const DenseMatrix c = random_psd(rng, 4, 4);
  const auto tr = transform_truncate(c, DenseMatrix::Identity(4, 4), 4);
  CHECK(max_abs(tr.c_tilde - c) < 1e-14);
  CHECK(tr.condition == doctest::Approx(1.0));
  CHECK_FALSE(tr.ill_conditioned);
  DenseMatrix bad = DenseMatrix::Identity(2, 2);
  bad(1, 1) = 1e-14;
  CHECK(transform_truncate(DenseMatrix::Identity(2, 2), bad, 2).ill_conditioned);
}

TEST_CASE("Hadamard circuit in the E basis truncates to diag(1/2, 1/4, 1/4)") {
  const StandardFormCircuit circ(1, {hadamard()}, {{PreprocessingFn::coordinate(0, 1)}});
  const auto art = extract(circ, CoreRoute::Dense);
  const EtkKernel k = EtkKernel::from_feature_set(circ.feature_set(), LocalBasis::E, DenseCore{*art.c});
  const auto basis = FunctionBasis::from_kernel(k);
  const auto gs = gram_schmidt_basis(basis.gram().gram);
  const auto tr = transform_truncate(*art.c, pad_L(gs), gs.rank);
  DenseMatrix expect = DenseMatrix::Zero(3, 3);
  expect.diagonal() << 0.5, 0.25, 0.25;
  CHECK(max_abs(tr.c_tilde - expect) < 1e-14);

  const auto dec = mercer_decompose(k);
  REQUIRE(dec.eigenvalues.size() == 3);
  CHECK(dec.eigenvalues[0] == doctest::Approx(0.5));
  CHECK(dec.eigenvalues[1] == doctest::Approx(0.25));
  CHECK(dec.eigenvalues[2] == doctest::Approx(0.25));
  const std::vector<double> x{0.4}, xp{0.4 + kPi};
  CHECK(std::abs(reconstruct_kernel(dec, x, xp)) < 1e-12);
  CHECK(reconstruct_kernel(dec, x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diagonalize sorts and preserves trace") {
  DenseMatrix d = DenseMatrix::Zero(3, 3);
  d.diagonal() << 0.2, 0.9, 0.5;
  const auto dec = diagonalize(d);
  CHECK(dec.eigenvalues == std::vector<double>{0.9, 0.5, 0.2});
  CHECK(max_abs(dec.u.cwiseAbs() - DenseMatrix(dec.u.cwiseAbs().real().cast<cplx>())) < 1e-15);
  CHECK(std::abs(std::abs(dec.u(0, 1)) - 1.0) < 1e-14);
  std::mt19937_64 rng(44);
  for (int t = 0; t < 10; ++t) {
    const DenseMatrix c = random_psd(rng, 6, 3);
    const auto r = diagonalize(c);
    double sum = 0.0;
    for (double g : r.eigenvalues) sum += g;
    CHECK(std::abs(sum - c.trace().real()) < 1e-10 * c.trace().real());
    CHECK(max_abs(r.u * r.u.adjoint() - DenseMatrix::Identity(6, 6)) < 1e-8);
    CHECK(r.eigenvalues.back() >= -1e-10 * r.eigenvalues.front());
  }
  DenseMatrix skew = DenseMatrix::Identity(2, 2);
  skew(0, 1) = 1.0;
  CHECK_THROWS_AS(diagonalize(skew), ValidationError);
}

TEST_CASE("pipeline reconstructs random ETKs on both providers") {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 8; ++trial) {
    const bool integer = trial % 2 == 0;
    const EtkKernel k = random_etk(rng, 1 + trial % 3, 1 + trial % 2, integer);
    const auto dec = mercer_decompose(k);
    CHECK(dec.functions->provider() ==
          (integer ? InnerProductKind::AnalyticFourier : InnerProductKind::Quadrature));
    for (int p = 0; p < 30; ++p) {
      const auto x = random_point(rng, k.data_dim()), y = random_point(rng, k.data_dim());
      CHECK(std::abs(reconstruct_kernel(dec, x, y) - k.evaluate(x, y)) < 1e-8);
    }
    const DenseMatrix eg = eigenfunction_gram(dec, *dec.functions);
    INFO("trial ", trial, " rank ", dec.rank, " warn ", dec.warnings.size());
    CHECK(max_abs(eg - DenseMatrix::Identity(dec.rank, dec.rank)) < 1e-6);
    for (double g : dec.eigenvalues) CHECK(g >= -1e-10 * dec.eigenvalues.front());
  }
}

TEST_CASE("spectrum is invariant under component permutation") {
  std::mt19937_64 rng(46);
  const EtkKernel k = random_etk(rng, 2, 2, true);
  const auto base = FunctionBasis::from_kernel(k);
  const DenseMatrix c = k.dense_core();
  const auto ref = mercer_decompose(base, c);
  std::vector<int> perm(9);
  for (int i = 0; i < 9; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<FourierSeries> series;
  for (int i : perm) series.push_back((*base.series())[i]);
  DenseMatrix pc(9, 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) pc(i, j) = c(perm[i], perm[j]);
  const auto got = mercer_decompose(FunctionBasis::fourier(series, "permuted"), pc);
  REQUIRE(got.eigenvalues.size() == ref.eigenvalues.size());
  for (std::size_t i = 0; i < ref.eigenvalues.size(); ++i)
    CHECK(std::abs(got.eigenvalues[i] - ref.eigenvalues[i]) < 1e-9);
}

TEST_CASE("Monte Carlo inner products agree with the analytic Gram within error bars") {
  std::mt19937_64 rng(47);
  const EtkKernel k = random_etk(rng, 2, 2, true);
  const auto base = FunctionBasis::from_kernel(k);
  const auto mc = base.with_monte_carlo(20000, 7);
  const auto rep = mc.gram();
  CHECK(rep.max_stderr > 0.0);
  CHECK(max_abs(rep.gram - base.gram().gram) < 6 * rep.max_stderr);
  const auto again = mc.gram();
  CHECK(max_abs(again.gram - rep.gram) == 0.0);
  MercerOptions opts;
  opts.provider = InnerProductKind::MonteCarlo;
  opts.mc_samples = 5000;
  opts.mc_seed = 3;
  const auto dec = mercer_decompose(k, opts);
  CHECK_FALSE(dec.warnings.empty());
  const auto x = random_point(rng, 2), y = random_point(rng, 2);
  CHECK(std::abs(reconstruct_kernel(dec, x, y) - k.evaluate(x, y)) < 1e-8);
}

TEST_CASE("decomposition serializes to JSON and CSV") {
  DenseMatrix d = DenseMatrix::Zero(2, 2);
  d.diagonal() << 0.25, 0.75;
  const auto dec = diagonalize(d);
  const std::string js = mercer_to_json(dec);
  CHECK(js.find("\"eigenvalues\"") != std::string::npos);
  CHECK(js.find("\"U\"") != std::string::npos);
  CHECK(spectrum_to_csv(dec.eigenvalues) == "index,eigenvalue\n0,0.75\n1,0.25\n");
}
