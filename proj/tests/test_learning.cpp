#include "doctest.h"

#include <cmath>
#include <random>

#include "etklab/errors.hpp"
#include "etklab/learning.hpp"
#include "etklab/parallel.hpp"
#include "test_util.hpp"

using namespace etklab;
using namespace testutil;

namespace {

GramMatrix real_psd(std::mt19937_64& rng, std::size_t m, std::size_t rank) {
  std::normal_distribution<double> g;
  RealMatrix b(m, rank);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  return (b * b.transpose()).cast<cplx>();
}

std::vector<double> random_reals(std::mt19937_64& rng, std::size_t m) {
  std::normal_distribution<double> g;
  std::vector<double> y(m);
  for (auto& v : y) v = g(rng);
  return y;
}

EtkKernel hadamard_kernel(std::size_t n) {
  DenseMatrix w = hadamard();
  for (std::size_t k = 1; k < n; ++k) w = kron(w, hadamard());
  return etk_from_circuit(single_layer_circuit(w));
}

}  // namespace

TEST_CASE("krr_fit trivial cases") {
  const std::vector<double> y{1.0, -2.0, 0.5};
  const KrrModel a = krr_fit(DenseMatrix::Identity(3, 3), y, 1e-12);
  for (int i = 0; i < 3; ++i) CHECK(a.coefficients(i) == doctest::Approx(y[i]).epsilon(1e-10));
  GramMatrix one(1, 1);
  one(0, 0) = 2.5;
  const std::vector<double> y1{3.0};
  CHECK(krr_fit(one, y1, 0.5).coefficients(0) == doctest::Approx(3.0 / 3.0));
}

TEST_CASE("krr_fit residual on random PSD Gram matrices") {
  std::mt19937_64 rng(61);
  for (std::size_t m : {5, 20, 60}) {
    for (std::size_t rank : {m / 2, m}) {
      const GramMatrix g = real_psd(rng, m, std::max<std::size_t>(rank, 1));
      const auto y = random_reals(rng, m);
      const KrrModel model = krr_fit(g, y, 1e-6);
      const RealVector yv = Eigen::Map<const RealVector>(y.data(), m);
      const RealVector r = (g.real() + 1e-6 * RealMatrix::Identity(m, m)) * model.coefficients - yv;
      CHECK(r.norm() <= 1e-8 * yv.norm());
    }
  }
}

TEST_CASE("krr_fit validation") {
  const GramMatrix g = DenseMatrix::Identity(2, 2);
  const std::vector<double> y{1.0, 2.0};
  CHECK_THROWS_AS(krr_fit(g, y, 0.0), ValidationError);
  CHECK_THROWS_AS(krr_fit(g, std::vector<double>{1.0}, 1.0), StructuralError);
  CHECK_THROWS_AS(krr_fit(g, std::vector<double>{1.0, NAN}, 1.0), ValidationError);
  GramMatrix bad = g;
  bad(0, 1) = INFINITY;
  CHECK_THROWS_AS(krr_fit(bad, y, 1.0), ValidationError);
  CHECK_THROWS_AS(krr_fit(DenseMatrix::Zero(2, 3), y, 1.0), StructuralError);
}

TEST_CASE("krr_predict") {
  std::mt19937_64 rng(62);
  const EtkKernel k = hadamard_kernel(2);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 6; ++i) xs.push_back(random_point(rng, 2));
  const auto y = random_reals(rng, xs.size());
  const GramMatrix g = gram_matrix(k, xs);
  SUBCASE("interpolation limit on a positive-definite Gram") {
    REQUIRE(Eigen::SelfAdjointEigenSolver<RealMatrix>(g.real()).eigenvalues().minCoeff() > 1e-6);
    const KrrModel model = krr_fit(g, y, 1e-12, xs);
    const auto f = krr_predict(model, k, xs);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(f[i] - y[i]) < 1e-6);
  }
  SUBCASE("zero coefficients predict zero") {
    KrrModel model = krr_fit(g, y, 1e-3, xs);
    model.coefficients.setZero();
    for (double v : krr_predict(model, k, xs)) CHECK(v == 0.0);
  }
  SUBCASE("dual expansion matches a direct sum") {
    const KrrModel model = krr_fit(g, y, 1e-2, xs);
    for (int t = 0; t < 20; ++t) {
      const auto x = random_point(rng, 2);
      double direct = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) direct += model.coefficients(i) * simulate_kernel(
          single_layer_circuit(kron(hadamard(), hadamard())), x, xs[i]);
      const std::vector<std::vector<double>> one{x};
      CHECK(std::abs(krr_predict(model, k, one)[0] - direct) <= 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("kernel target alignment") {
  std::mt19937_64 rng(63);
  const auto y = random_reals(rng, 5);
  const RealVector v = Eigen::Map<const RealVector>(y.data(), 5);
  CHECK(kernel_target_alignment((v * v.transpose()).cast<cplx>(), y) == doctest::Approx(1.0).epsilon(1e-14));
  RealVector u = RealVector::Zero(5);
  u(0) = 1.0;
  const std::vector<double> orth{0.0, 1.0, -2.0, 0.5, 3.0};
  CHECK(std::abs(kernel_target_alignment((u * u.transpose()).cast<cplx>(), orth)) < 1e-15);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 2 + t % 9;
    const GramMatrix g = random_matrix(rng, m, m).real().cast<cplx>();
    const auto yy = random_reals(rng, m);
    const double a = kernel_target_alignment(g, yy);
    CHECK(a >= -1.0);
    CHECK(a <= 1.0);
  }
  CHECK_THROWS_AS(kernel_target_alignment(DenseMatrix::Zero(2, 2), std::vector<double>{1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(kernel_target_alignment(DenseMatrix::Identity(2, 2), std::vector<double>{0.0, 0.0}), ValidationError);
}

TEST_CASE("tailored targets") {
  CHECK(tailored_term_count(3) == 7);
  CHECK(tailored_term_count(4) == 11);
  Rng r(64);
  const auto st = haar_state(3, r);
  const auto terms = single_layer_spectrum(st.probabilities());
  const auto dec = spectrum_to_mercer(terms);
  const TailoredTarget t = tailored_target(dec, 7, 9);
  CHECK(t.size() == 7);

  // Oracle: rank the {0} ∪ Ω⁺ terms directly from the spectrum.
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& term : terms) {
    const auto nz = std::find_if(term.omega.begin(), term.omega.end(), [](int w) { return w != 0; });
    if (nz == term.omega.end() || *nz > 0) ranked.emplace_back(-term.eigenvalue, term.alpha);
  }
  std::sort(ranked.begin(), ranked.end());
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(t.alpha[i] == ranked[i].second);
    CHECK(t.coefficients[i] >= 0.5 * -ranked[i].first);
    CHECK(t.coefficients[i] <= 1.5 * -ranked[i].first);
  }
  const std::vector<double> zero(3, 0.0);
  CHECK(t(zero) == doctest::Approx(t.bound()).epsilon(1e-14));
  const TailoredTarget top = tailored_target(dec, 1, 9);
  CHECK(top.alpha[0] == ranked[0].second);
  CHECK(tailored_target(dec, 7, 9).coefficients == t.coefficients);
  CHECK_THROWS_AS(tailored_target(dec, 0, 1), ValidationError);
  CHECK_THROWS_AS(tailored_target(dec, ranked.size() + 1, 1), ValidationError);
}

TEST_CASE("tailored target ties break lexicographically") {
  const std::vector<double> uniform(4, 0.25);
  const auto dec = spectrum_to_mercer(single_layer_spectrum(uniform));
  const TailoredTarget t = tailored_target(dec, 3, 1);
  CHECK(t.alpha == std::vector<std::string>{"0000", "0001", "0100"});
}

TEST_CASE("datasets") {
  Rng r(65);
  const auto dec = spectrum_to_mercer(single_layer_spectrum(haar_state(3, r).probabilities()));
  const TailoredTarget t = tailored_target(dec, 7, 2);
  const Dataset d = generate_dataset(t, 3, 54, 0.2, 17);
  CHECK(d.train.size() == 43);
  CHECK(d.test.size() == 11);
  CHECK(test_count(10, 0.2) == 2);
  CHECK(test_count(11, 0.2) == 3);
  std::vector<int> seen(54, 0);
  for (auto i : d.train) ++seen[i];
  for (auto i : d.test) ++seen[i];
  for (int s : seen) CHECK(s == 1);
  for (std::size_t i = 0; i < d.inputs.size(); ++i) {
    for (double v : d.inputs[i]) CHECK(std::abs(v) <= std::numbers::pi);
    CHECK(std::abs(d.targets[i]) <= t.bound() + 1e-12);
    CHECK(d.targets[i] == t(d.inputs[i]));
  }
  const Dataset again = generate_dataset(t, 3, 54, 0.2, 17);
  CHECK(again.inputs == d.inputs);
  CHECK(again.train == d.train);
  CHECK(generate_dataset(t, 3, 54, 0.2, 18).inputs != d.inputs);

  const Dataset back = dataset_from_json(dataset_to_json(d));
  CHECK(back.inputs == d.inputs);
  CHECK(back.targets == d.targets);
  CHECK(back.train == d.train);
  CHECK(back.test == d.test);
  CHECK(back.seed == d.seed);
  CHECK(dataset_to_json(back) == dataset_to_json(d));

  CHECK_THROWS_AS(generate_dataset(t, 3, 9, 0.2, 1), ValidationError);
  CHECK_THROWS_AS(dataset_from_json("{\"n\": 1"), ValidationError);
  CHECK_THROWS_AS(dataset_from_json("{\"n\":1,\"seed\":0,\"test_ratio\":0.2,\"inputs\":[[0]],\"targets\":[0],"
                                    "\"train\":[0],\"test\":[0]}"),
                  ValidationError);
  CHECK_THROWS_AS(dataset_from_json("{\"n\":1,\"seed\":0,\"test_ratio\":0.2,\"inputs\":[[0]],\"targets\":[0],"
                                    "\"train\":[0],\"test\":[],\"extra\":1}"),
                  ValidationError);
}

TEST_CASE("schedules") {
  const auto s = log_schedule(4, 129, 10);
  CHECK(s.size() == 10);
  CHECK(s.front() == 4);
  CHECK(s.back() == 129);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i] > s[i - 1]);
  const auto dense = log_schedule(4, 8, 10);
  CHECK(dense == std::vector<std::size_t>{4, 5, 6, 7, 8});
  CHECK(half_data_index(s, 129) == static_cast<std::size_t>(
      std::min_element(s.begin(), s.end(), [](auto a, auto b) {
        return std::abs(double(a) - 64.5) < std::abs(double(b) - 64.5);
      }) - s.begin()));
  CHECK_THROWS_AS(log_schedule(0, 4), ValidationError);
}

TEST_CASE("learning curves") {
  Rng r(66);
  const auto st = haar_state(2, r);
  const auto dec = spectrum_to_mercer(single_layer_spectrum(st.probabilities()));
  const EtkKernel k = etk_from_circuit(single_layer_circuit(st.w));
  TailoredTarget t = tailored_target(dec, tailored_term_count(2), 3);
  const Dataset d = generate_dataset(t, 2, 18, 0.2, 4);
  const std::vector<std::size_t> sched{2, 5, 10, 14};

  const auto curve = learning_curve(k, d, sched);
  REQUIRE(curve.size() == 4);
  for (const auto& p : curve) {
    CHECK(std::isfinite(p.mse));
    CHECK(std::isfinite(p.alignment));
  }
  CHECK(curve.back().mse < curve.front().mse);

  // Oracle: fit the first m points directly and average the squared test error.
  const auto tr = d.train_inputs();
  const auto te = d.test_inputs();
  const auto ytr = d.train_targets(), yte = d.test_targets();
  for (std::size_t s = 0; s < sched.size(); ++s) {
    const std::vector<std::vector<double>> xs(tr.begin(), tr.begin() + sched[s]);
    const std::vector<double> ys(ytr.begin(), ytr.begin() + sched[s]);
    const GramMatrix g = gram_matrix(k, xs);
    const KrrModel m = krr_fit(g, ys, default_ridge(g), xs);
    const auto f = krr_predict(m, k, te);
    double mse = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) mse += (f[i] - yte[i]) * (f[i] - yte[i]) / f.size();
    CHECK(std::abs(curve[s].mse - mse) <= 1e-10 * std::max(1.0, mse));
  }

  std::fill(t.coefficients.begin(), t.coefficients.end(), 0.0);
  const Dataset z = generate_dataset(t, 2, 18, 0.2, 4);
  for (const auto& p : learning_curve(k, z, sched)) {
    CHECK(p.mse == 0.0);
    CHECK(std::isnan(p.alignment));
  }
  const std::vector<std::size_t> too_big{15};
  CHECK_THROWS_AS(learning_curve(k, d, too_big), ValidationError);
}

TEST_CASE("learning experiment is deterministic and counts rows") {
  LearningConfig cfg;
  cfg.n = 2;
  cfg.models = {ScalingModel::haar(), ScalingModel::concentrated(2)};
  cfg.instances = 3;
  cfg.schedule = {2, 4, 6, 10, 14};
  cfg.seed = 5;
  set_thread_count(1);
  const auto a = learning_experiment(cfg);
  set_thread_count(4);
  const auto b = learning_experiment(cfg);
  set_thread_count(0);
  CHECK(a.to_csv() == b.to_csv());
  const std::string csv = a.to_csv();
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 1 + 30 + 2 * 2 * 5);
  CHECK(a.train_size == 14);
  CHECK(a.cells[0].schedule[a.half_index] == 6);

  cfg.zero_target = true;
  for (const auto& c : learning_experiment(cfg).cells)
    for (double v : c.mean_mse) CHECK(v == 0.0);
}
