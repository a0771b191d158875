#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etklab/caps.hpp"
#include "etklab/etk.hpp"
#include "etklab/mercer.hpp"
#include "etklab/quantum_etk.hpp"
#include "etklab/single_layer.hpp"

namespace etklab {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

struct KrrModel {
  double lambda = 0.0;
  std::vector<std::vector<double>> inputs;
  RealVector coefficients;  // (G + λI) a = y
};

/// Dual coefficients via Cholesky of G + λI, falling back to LDLᵀ, with iterative refinement.
KrrModel krr_fit(const GramMatrix& gram, std::span<const double> y, double lambda);
/// Same, with the training inputs attached for later prediction.
KrrModel krr_fit(const GramMatrix& gram, std::span<const double> y, double lambda,
                 std::vector<std::vector<double>> inputs);
/// 1e-8 times the mean diagonal of G.
double default_ridge(const GramMatrix& gram);

/// f(x) = Σ_i a_i K(x, x_i).
std::vector<double> krr_predict(const KrrModel& model, const EtkKernel& kernel,
                                std::span<const std::vector<double>> xs);
/// Same, from a precomputed cross Gram K(x_new, x_train).
std::vector<double> krr_predict(const KrrModel& model, const GramMatrix& cross);

/// ⟨G, yyᵀ⟩_F / (‖G‖_F ‖yyᵀ‖_F).
double kernel_target_alignment(const GramMatrix& gram, std::span<const double> y);

struct TailoredTarget {
  std::size_t n = 0;
  std::vector<std::string> alpha;
  std::vector<std::vector<int>> omega;
  std::vector<double> coefficients;  // c_α ≥ 0

  /// Σ_α √c_α cos(ω^α·x).
  double operator()(std::span<const double> x) const;
  /// Σ_α √c_α, an upper bound on |f|.
  double bound() const;
  std::size_t size() const { return alpha.size(); }
};

/// 1 + n + n(n−1)/2.
std::size_t tailored_term_count(std::size_t n);

/// Top-P cosine terms of a spectrum_to_mercer decomposition, c_α = γ_α × U[0.5, 1.5].
TailoredTarget tailored_target(const MercerDecomposition& dec, std::size_t p, std::uint64_t seed);

struct Dataset {
  std::size_t n = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
  std::vector<std::size_t> train;  // in fitting order
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  double test_ratio = 0.2;

  std::vector<std::vector<double>> train_inputs() const;
  std::vector<std::vector<double>> test_inputs() const;
  std::vector<double> train_targets() const;
  std::vector<double> test_targets() const;
};

/// ⌈ratio · total⌉.
std::size_t test_count(std::size_t total, double test_ratio);

/// Uniform inputs on [−π, π]^n, noiseless targets, seeded random split.
Dataset generate_dataset(const TailoredTarget& target, std::size_t n, std::size_t total, double test_ratio,
                         std::uint64_t seed);

std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);

/// `points` integer sizes, logarithmically spaced over [lo, hi], deduplicated.
std::vector<std::size_t> log_schedule(std::size_t lo, std::size_t hi, std::size_t points = 10);
/// Index of the schedule entry nearest train/2.
std::size_t half_data_index(std::span<const std::size_t> schedule, std::size_t train);

struct CurvePoint {
  std::size_t m = 0;
  double mse = 0.0;
  double alignment = 0.0;  // NaN when the training targets vanish
};

/// Fits on the first m training points for each m; λ defaults to default_ridge of each sub-Gram.
std::vector<CurvePoint> learning_curve(const EtkKernel& kernel, const Dataset& data,
                                       std::span<const std::size_t> schedule,
                                       std::optional<double> lambda = std::nullopt);
/// Same, from a precomputed Gram over all inputs (train and test).
std::vector<CurvePoint> learning_curve(const GramMatrix& full_gram, const Dataset& data,
                                       std::span<const std::size_t> schedule,
                                       std::optional<double> lambda = std::nullopt);

/// Single-layer circuit on n qubits with pre-encoding unitary W and coordinate encodings.
StandardFormCircuit single_layer_circuit(const DenseMatrix& w);

struct LearningConfig {
  std::size_t n = 4;
  std::vector<ScalingModel> models;
  std::size_t instances = 30;
  std::optional<std::size_t> total;  // default 2·3^n
  double test_ratio = 0.2;
  std::vector<std::size_t> schedule;  // default: 10 log-spaced sizes from 4 to the train size
  std::optional<double> lambda;
  bool zero_target = false;
  std::uint64_t seed = 0;
};

struct LearningCell {
  std::string model;
  std::vector<std::size_t> schedule;
  std::vector<std::vector<CurvePoint>> curves;  // per instance
  std::vector<double> mean_mse, std_mse, mean_alignment, std_alignment;
};

struct LearningResult {
  std::vector<LearningCell> cells;  // one per model
  std::size_t train_size = 0;
  std::size_t half_index = 0;
  const LearningCell* find(const std::string& model) const;
  /// model,instance,m,mse,alignment; per-instance rows, then "mean" and "std" rows per m.
  std::string to_csv() const;
};

LearningResult learning_experiment(const LearningConfig& cfg, const Caps& caps = {});

}  // namespace etklab
