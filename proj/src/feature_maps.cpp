#include "etklab/feature_maps.hpp"

#include <cmath>
#include <string>

#include "etklab/errors.hpp"

namespace etklab {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;

void check_input(const PreprocessingFn& fn, std::span<const double> x) {
  if (x.size() != fn.input_dim())
    throw StructuralError("pre-processing expects input dimension " + std::to_string(fn.input_dim()) +
                          ", got " + std::to_string(x.size()));
}
}  // namespace

PreprocessingFn PreprocessingFn::coordinate(std::size_t index, std::size_t input_dim) {
  if (index >= input_dim)
    throw ValidationError("coordinate index " + std::to_string(index) + " out of range for input dim " +
                          std::to_string(input_dim));
  PreprocessingFn f;
  f.kind_ = Kind::Coordinate;
  f.index_ = index;
  f.input_dim_ = input_dim;
  return f;
}

PreprocessingFn PreprocessingFn::affine(std::vector<double> weights, double bias) {
  PreprocessingFn f;
  f.kind_ = Kind::Affine;
  f.input_dim_ = weights.size();
  f.weights_ = std::move(weights);
  f.bias_ = bias;
  return f;
}

PreprocessingFn PreprocessingFn::zero(std::size_t input_dim) {
  PreprocessingFn f;
  f.kind_ = Kind::Zero;
  f.input_dim_ = input_dim;
  return f;
}

double PreprocessingFn::operator()(std::span<const double> x) const {
  check_input(*this, x);
  switch (kind_) {
    case Kind::Coordinate:
      return x[index_];
    case Kind::Affine: {
      double v = bias_;
      for (std::size_t i = 0; i < weights_.size(); ++i) v += weights_[i] * x[i];
      return v;
    }
    case Kind::Zero:
      return 0.0;
  }
  return 0.0;
}

std::vector<double> PreprocessingFn::as_affine_weights() const {
  std::vector<double> w(input_dim_, 0.0);
  if (kind_ == Kind::Coordinate) w[index_] = 1.0;
  if (kind_ == Kind::Affine) w = weights_;
  return w;
}

bool PreprocessingFn::has_integer_frequencies() const {
  for (double w : as_affine_weights())
    if (w != std::round(w)) return false;
  return true;
}

std::size_t LocalFeatureSet::input_dim() const {
  if (maps.empty()) throw StructuralError("empty feature set");
  const std::size_t d = maps.front().input_dim();
  for (const auto& m : maps)
    if (m.input_dim() != d) throw StructuralError("feature maps disagree on the input dimension");
  return d;
}

std::array<double, 3> eval_local_T(const PreprocessingFn& fn, std::span<const double> x) {
  const double phi = fn(x);
  return {kInvSqrt2, kInvSqrt2 * std::cos(phi), kInvSqrt2 * std::sin(phi)};
}

std::array<cplx, 4> eval_local_E(const PreprocessingFn& fn, std::span<const double> x) {
  const double phi = fn(x);
  const cplx e = std::polar(1.0, phi);
  return {cplx{1.0, 0.0}, e, std::conj(e), cplx{1.0, 0.0}};
}

DenseMatrix isometry_P() {
  const cplx i{0.0, 1.0};
  DenseMatrix p(4, 3);
  p << 1.0, 0.0, 0.0,
       0.0, 1.0, i,
       0.0, 1.0, -i,
       1.0, 0.0, 0.0;
  return p * kInvSqrt2;
}

std::vector<CVector> eval_product_feature(const LocalFeatureSet& set, std::span<const double> x,
                                          LocalBasis basis) {
  std::vector<CVector> out;
  out.reserve(set.size());
  for (const auto& fn : set.maps) {
    if (basis == LocalBasis::T) {
      const auto t = eval_local_T(fn, x);
      CVector v(3);
      v << t[0], t[1], t[2];
      out.push_back(std::move(v));
    } else {
      const auto e = eval_local_E(fn, x);
      CVector v(4);
      v << e[0], e[1], e[2], e[3];
      out.push_back(std::move(v));
    }
  }
  return out;
}

FourierSeries fourier_constant(std::size_t dim, cplx value) {
  return FourierSeries{{std::vector<int>(dim, 0), value}};
}

FourierSeries fourier_product(const FourierSeries& a, const FourierSeries& b) {
  FourierSeries out;
  for (const auto& [wa, ca] : a)
    for (const auto& [wb, cb] : b) {
      if (wa.size() != wb.size()) throw StructuralError("fourier_product: dimension mismatch");
      std::vector<int> w(wa.size());
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = wa[i] + wb[i];
      out[w] += ca * cb;
    }
  return out;
}

cplx fourier_inner(const FourierSeries& f, const FourierSeries& g) {
  cplx acc{};
  // Both maps are ordered; merge.
  auto it = f.begin();
  auto jt = g.begin();
  while (it != f.end() && jt != g.end()) {
    if (it->first < jt->first) {
      ++it;
    } else if (jt->first < it->first) {
      ++jt;
    } else {
      acc += std::conj(it->second) * jt->second;
      ++it;
      ++jt;
    }
  }
  return acc;
}

cplx fourier_eval(const FourierSeries& f, std::span<const double> x) {
  cplx acc{};
  for (const auto& [w, c] : f) {
    double phase = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) phase += w[i] * x[i];
    acc += c * std::polar(1.0, phase);
  }
  return acc;
}

std::optional<std::vector<FourierSeries>> local_fourier(const PreprocessingFn& fn, LocalBasis basis) {
  if (!fn.has_integer_frequencies()) return std::nullopt;
  const std::size_t d = fn.input_dim();
  std::vector<int> plus(d), minus(d);
  const auto w = fn.as_affine_weights();
  for (std::size_t i = 0; i < d; ++i) {
    plus[i] = static_cast<int>(std::lround(w[i]));
    minus[i] = -plus[i];
  }
  const std::vector<int> zero(d, 0);
  const double b = fn.kind() == PreprocessingFn::Kind::Affine ? fn.bias() : 0.0;
  const cplx eb = std::polar(1.0, b);
  const cplx i{0.0, 1.0};
  // e^{iφ} = e^{ib} e^{iw·x}
  FourierSeries ep, em;
  ep[plus] += eb;
  em[minus] += std::conj(eb);
  if (basis == LocalBasis::E) return std::vector<FourierSeries>{fourier_constant(d, 1.0), ep, em, fourier_constant(d, 1.0)};
  // cos φ = (e^{iφ} + e^{−iφ})/2, sin φ = (e^{iφ} − e^{−iφ})/(2i)
  FourierSeries c, s;
  c[plus] += 0.5 * kInvSqrt2 * eb;
  c[minus] += 0.5 * kInvSqrt2 * std::conj(eb);
  s[plus] += kInvSqrt2 * eb / (2.0 * i);
  s[minus] -= kInvSqrt2 * std::conj(eb) / (2.0 * i);
  std::erase_if(c, [](const auto& kv) { return kv.second == cplx{}; });
  std::erase_if(s, [](const auto& kv) { return kv.second == cplx{}; });
  return std::vector<FourierSeries>{fourier_constant(d, kInvSqrt2), c, s};
}

}  // namespace etklab
