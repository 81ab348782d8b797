#include "red/kernel_support.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "red/error.hpp"

namespace red {

const char* to_string(KernelExponent e) {
  return e == KernelExponent::euclidean_norm ? "euclidean_norm" : "squared_norm";
}

KernelExponent kernel_exponent_from_string(const std::string& name) {
  if (name == "euclidean_norm") return KernelExponent::euclidean_norm;
  if (name == "squared_norm") return KernelExponent::squared_norm;
  fail("InvalidConfig", "unknown kernel exponent form '" + name + "'");
}

void KernelSpec::validate() const {
  require(bandwidth > 0.0 && std::isfinite(bandwidth), "InvalidBandwidth",
          "kernel bandwidth must be positive");
}

double gaussian_kernel(const Vector& x, const Vector& y, const KernelSpec& spec) {
  spec.validate();
  require(x.size() == y.size(), "ShapeMismatch", "kernel arguments have different dims");
  const double sq = (x - y).squaredNorm();
  const double dist = spec.exponent == KernelExponent::euclidean_norm ? std::sqrt(sq) : sq;
  return std::exp(-dist / spec.bandwidth);
}

double median_bandwidth(const Matrix& points) {
  const Eigen::Index n = points.cols();
  require(n >= 2, "DegenerateData", "median bandwidth needs at least two points");
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dists.push_back((points.col(i) - points.col(j)).norm());
  }
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  double median = dists[mid];
  if (dists.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  require(median > 0.0, "DegenerateData", "median pairwise distance is zero");
  return median;
}

Matrix kernel_matrix(const Matrix& points, const KernelSpec& spec) {
  const Eigen::Index n = points.cols();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      k(i, j) = k(j, i) = gaussian_kernel(points.col(i), points.col(j), spec);
    }
  }
  return k;
}

Vector KernelSupportModel::kernel_vector(const Vector& x) const {
  require(x.size() == points.rows(), "ShapeMismatch",
          "query dim " + std::to_string(x.size()) + " != " + std::to_string(points.rows()));
  Vector kx(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) kx(i) = gaussian_kernel(points.col(i), x, spec);
  return kx;
}

KernelSupportModel fit_kernel_support(const Matrix& points, const KernelSpec& spec,
                                      const KernelFitOptions& options) {
  spec.validate();
  const Eigen::Index n = points.cols();
  require(n >= 1, "EmptyDataset", "kernel support needs at least one point");
  require(points.allFinite(), "NonFiniteInput", "training points must be finite");
  if (options.m) {
    require(*options.m >= 1 && *options.m <= n, "InvalidComponents",
            "m must lie in [1, N], got " + std::to_string(*options.m));
  }
  if (options.ridge) require(*options.ridge >= 0.0, "InvalidRidge", "ridge must be >= 0");

  const Matrix k = kernel_matrix(points, spec);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(k);
  require(solver.info() == Eigen::Success, "EigenFailure", "eigendecomposition did not converge");
  // Eigen returns ascending order; flip to descending.
  const Vector vals = solver.eigenvalues().reverse();
  const Matrix vecs = solver.eigenvectors().rowwise().reverse();

  const double ridge = options.ridge.value_or(kDefaultRelativeRidge * std::max(vals(0), 0.0));

  Eigen::Index keep = 0;
  if (options.m) {
    keep = *options.m;
  } else {
    const double goal = kAutoTraceFraction * k.trace();
    double captured = 0.0;
    while (keep < n && captured < goal) captured += vals(keep++);
  }
  Eigen::Index above = 0;
  while (above < keep && vals(above) > ridge) ++above;
  require(above >= 1, "NoComponents", "no kernel eigenvalue exceeds the ridge cutoff");

  return KernelSupportModel{points, spec, vals.head(above), vecs.leftCols(above), ridge};
}

double kernel_score(const KernelSupportModel& model, const Vector& x) {
  const Vector kx = model.kernel_vector(x);
  const Vector proj = model.eigvecs.transpose() * kx;
  const double explained = (proj.array().square() / model.eigvals.array()).sum();
  // k(x, x) == 1 for both exponent forms.
  return std::clamp(1.0 - explained, 0.0, 1.0);
}

bool membership(const KernelSupportModel& model, const Vector& x, double tau) {
  require(tau > 0.0, "InvalidThreshold", "membership threshold must be positive");
  return kernel_score(model, x) <= tau;
}

nlohmann::json to_json(const KernelSupportModel& model) {
  nlohmann::json x = nlohmann::json::array();
  for (Eigen::Index c = 0; c < model.points.cols(); ++c) {
    x.push_back(std::vector<double>(model.points.col(c).data(),
                                    model.points.col(c).data() + model.points.rows()));
  }
  nlohmann::json vecs = nlohmann::json::array();
  for (Eigen::Index r = 0; r < model.eigvecs.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(model.eigvecs.cols()));
    for (Eigen::Index c = 0; c < model.eigvecs.cols(); ++c) row[static_cast<std::size_t>(c)] = model.eigvecs(r, c);
    vecs.push_back(std::move(row));
  }
  return {{"spec", {{"bandwidth", model.spec.bandwidth}, {"exponent_form", to_string(model.spec.exponent)}}},
          {"x", std::move(x)},
          {"m", model.m()},
          {"eigvals", std::vector<double>(model.eigvals.data(), model.eigvals.data() + model.eigvals.size())},
          {"eigvecs", std::move(vecs)},
          {"ridge", model.ridge},
          {"format_version", 1}};
}

KernelSupportModel kernel_model_from_json(const nlohmann::json& j) {
  require(j.value("format_version", 0) == 1, "UnsupportedFormat", "kernel format_version must be 1");
  KernelSupportModel model;
  model.spec.bandwidth = j.at("spec").at("bandwidth").get<double>();
  model.spec.exponent = kernel_exponent_from_string(j.at("spec").at("exponent_form").get<std::string>());
  model.spec.validate();
  const auto pts = j.at("x").get<std::vector<std::vector<double>>>();
  require(!pts.empty(), "EmptyDataset", "kernel model has no points");
  const auto d = static_cast<Eigen::Index>(pts.front().size());
  const auto n = static_cast<Eigen::Index>(pts.size());
  model.points.resize(d, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& p = pts[static_cast<std::size_t>(c)];
    require(static_cast<Eigen::Index>(p.size()) == d, "ShapeMismatch", "ragged kernel points");
    for (Eigen::Index r = 0; r < d; ++r) model.points(r, c) = p[static_cast<std::size_t>(r)];
  }
  const auto vals = j.at("eigvals").get<std::vector<double>>();
  const auto m = j.at("m").get<int>();
  require(static_cast<int>(vals.size()) == m && m >= 1, "ShapeMismatch", "eigvals length != m");
  model.eigvals = Eigen::Map<const Vector>(vals.data(), m);
  const auto vecs = j.at("eigvecs").get<std::vector<std::vector<double>>>();
  require(static_cast<Eigen::Index>(vecs.size()) == n, "ShapeMismatch", "eigvecs rows != N");
  model.eigvecs.resize(n, m);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = vecs[static_cast<std::size_t>(r)];
    require(static_cast<int>(row.size()) == m, "ShapeMismatch", "eigvecs cols != m");
    for (int c = 0; c < m; ++c) model.eigvecs(r, c) = row[static_cast<std::size_t>(c)];
  }
  model.ridge = j.at("ridge").get<double>();
  return model;
}

}  // namespace red
