#pragma once

// Kernel-PCA support estimation.
//
// With K the uncentred kernel matrix of the training points and (λ_i, u_i)
// its top eigenpairs, a query x is scored by the squared distance of φ(x)
// from the span of the retained principal directions:
//
//   score(x) = k(x, x) - K_x^T U diag(1/λ) U^T K_x,   (K_x)_i = k(x_i, x)
//
// which is zero on the training set (full rank) and tends to k(x, x) = 1 far
// away from it.

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "red/nn.hpp"

namespace red {

enum class KernelExponent { euclidean_norm, squared_norm };

const char* to_string(KernelExponent e);
KernelExponent kernel_exponent_from_string(const std::string& name);

/// k(x, x') = exp(-‖x - x'‖ / σ) or exp(-‖x - x'‖² / σ).
struct KernelSpec {
  double bandwidth = 1.0;
  KernelExponent exponent = KernelExponent::euclidean_norm;

  void validate() const;
};

double gaussian_kernel(const Vector& x, const Vector& y, const KernelSpec& spec);

/// Median pairwise Euclidean distance over all point pairs (columns).
double median_bandwidth(const Matrix& points);

struct KernelSupportModel {
  Matrix points;   // d x N training points
  KernelSpec spec;
  Vector eigvals;  // m retained eigenvalues, descending, all > ridge
  Matrix eigvecs;  // N x m, orthonormal columns
  double ridge = 0.0;

  int m() const { return static_cast<int>(eigvals.size()); }
  int input_dim() const { return static_cast<int>(points.rows()); }

  /// Kernel vector K_x against every training point.
  Vector kernel_vector(const Vector& x) const;
};

struct KernelFitOptions {
  std::optional<int> m;          // nullopt: smallest m capturing 99.9% of trace(K)
  std::optional<double> ridge;   // nullopt: 1e-10 * λ_max
};

inline constexpr double kAutoTraceFraction = 0.999;
inline constexpr double kDefaultRelativeRidge = 1e-10;

Matrix kernel_matrix(const Matrix& points, const KernelSpec& spec);

KernelSupportModel fit_kernel_support(const Matrix& points, const KernelSpec& spec,
                                      const KernelFitOptions& options = {});

double kernel_score(const KernelSupportModel& model, const Vector& x);

/// True iff kernel_score(model, x) <= tau.
bool membership(const KernelSupportModel& model, const Vector& x, double tau);

nlohmann::json to_json(const KernelSupportModel& model);
KernelSupportModel kernel_model_from_json(const nlohmann::json& j);

}  // namespace red
