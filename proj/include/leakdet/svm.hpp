#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leakdet/banding.hpp"
#include "leakdet/features.hpp"

namespace leakdet {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

enum class KernelKind { linear, rbf };

KernelKind parse_kernel(std::string_view name);
std::string_view kernel_name(KernelKind k) noexcept;

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double gamma = 1.0;  // rbf only

  void validate() const;
  double operator()(std::span<const double> a, std::span<const double> b) const;
  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

// Gram matrix of the rows of x (n x n).
Matrix gram_matrix(const Matrix& x, const KernelSpec& kernel);
Matrix gram_matrix_serial(const Matrix& x, const KernelSpec& kernel);

// Per-feature z-scoring fitted on training rows; zero-std features map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;

  void apply_row(std::span<const double> in, std::span<double> out) const;
  Matrix apply(const Matrix& x) const;
  std::uint64_t fingerprint() const;
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

Standardizer fit_standardizer(const Matrix& x);

struct DualSolution {
  std::vector<double> alpha;
  double bias = 0.0;  // f(x) = sum alpha_i y_i K(x_i, x) + bias
  double dual_objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct SolverOptions {
  double tol = 1e-3;
  std::size_t max_iterations = 1'000'000;
};

// Soft-margin dual by SMO: the pair is the maximally violating i plus the j
// with the largest second-order gain. y entries are -1 or +1.
DualSolution smo_solve(const Matrix& gram, std::span<const int> y, double C,
                       const SolverOptions& opts = {});

// Everything needed to rebuild the feature vector of a window from raw PSD.
struct PipelineMeta {
  BandingConfig banding;
  double max_freq_hz = 0.0;
  BandPair pair;
  WindowConfig window;
  FeatureConfig features;
  EntropyEdges edges;

  friend bool operator==(const PipelineMeta&, const PipelineMeta&) = default;
};

struct SvmModel {
  KernelSpec kernel;
  double C = 1.0;
  Matrix support_vectors;  // standardized rows
  std::vector<double> dual_coefs;  // alpha_i * y_i
  double bias = 0.0;
  Standardizer standardizer;
  std::vector<std::string> feature_order;
  std::optional<PipelineMeta> meta;
  bool converged = true;
  std::size_t iterations = 0;

  // Weight vector in standardized space; linear kernel only.
  std::vector<double> primal_weights() const;
};

struct TrainOptions {
  double C = 1.0;
  KernelSpec kernel;
  SolverOptions solver;
};

// y in {0,1}; rows are standardized internally.
SvmModel train(const Matrix& x, std::span<const std::uint8_t> y, const TrainOptions& opts,
               std::vector<std::string> feature_order = {});

double decision_function(const SvmModel& model, std::span<const double> x_raw);
// 1 iff f(x) > 0; ties go to class 0.
std::uint8_t predict(const SvmModel& model, std::span<const double> x_raw);
std::vector<std::uint8_t> predict_all(const SvmModel& model, const Matrix& x_raw);

std::string format_model(const SvmModel& model);
SvmModel parse_model(std::string_view text);
void save_model(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_model(const std::filesystem::path& path);

}  // namespace leakdet
