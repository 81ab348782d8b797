#include <algorithm>
#include <cmath>
#include <numeric>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "red/error.hpp"
#include "red/kernel_support.hpp"

namespace red {
namespace {

Matrix uniform_points(int dim, int n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(lo, hi);
  Matrix x(dim, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = unif(rng);
  return x;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

TEST(GaussianKernel, UnitDiagonal) {
  EXPECT_EQ(gaussian_kernel(vec({0.3, -2.0}), vec({0.3, -2.0}), KernelSpec{0.7}), 1.0);
}

TEST(GaussianKernel, EuclideanForm) {
  EXPECT_NEAR(gaussian_kernel(vec({0.0}), vec({1.0}), KernelSpec{1.0}), 0.36787944117144233, 1e-15);
  EXPECT_NEAR(gaussian_kernel(vec({0.0, 0.0}), vec({0.0, 2.0}), KernelSpec{2.0}), std::exp(-1.0), 1e-15);
}

TEST(GaussianKernel, SquaredForm) {
  const KernelSpec spec{2.0, KernelExponent::squared_norm};
  EXPECT_NEAR(gaussian_kernel(vec({0.0}), vec({2.0}), spec), std::exp(-2.0), 1e-15);
}

TEST(GaussianKernel, SymmetricAndErrors) {
  const Vector a = vec({0.1, 0.9});
  const Vector b = vec({-0.4, 0.2});
  EXPECT_EQ(gaussian_kernel(a, b, KernelSpec{0.5}), gaussian_kernel(b, a, KernelSpec{0.5}));
  EXPECT_EQ(kind_of([&] { gaussian_kernel(a, vec({1.0}), KernelSpec{1.0}); }), "ShapeMismatch");
  EXPECT_EQ(kind_of([&] { gaussian_kernel(a, b, KernelSpec{0.0}); }), "InvalidBandwidth");
}

TEST(MedianBandwidth, Examples) {
  Matrix two(1, 2);
  two << 0, 1;
  EXPECT_EQ(median_bandwidth(two), 1.0);
  Matrix three(1, 3);
  three << 0, 1, 3;
  EXPECT_EQ(median_bandwidth(three), 2.0);
  Matrix same(1, 2);
  same << 0, 0;
  EXPECT_EQ(kind_of([&] { median_bandwidth(same); }), "DegenerateData");
  EXPECT_THROW(median_bandwidth(Matrix::Zero(1, 1)), Error);
}

TEST(FitKernelSupport, SinglePoint) {
  const KernelSupportModel model = fit_kernel_support(vec({0.2, 0.4}), KernelSpec{1.0});
  ASSERT_EQ(model.m(), 1);
  EXPECT_NEAR(model.eigvals(0), 1.0, 1e-15);
}

TEST(FitKernelSupport, SinglePointScoreIsOneMinusCSquared) {
  const KernelSpec spec{0.8};
  const KernelSupportModel model = fit_kernel_support(vec({0.0}), spec);
  const double c = gaussian_kernel(vec({0.0}), vec({0.5}), spec);
  EXPECT_NEAR(kernel_score(model, vec({0.5})), 1.0 - c * c, 1e-14);
}

TEST(FitKernelSupport, DuplicatePointsAreRankOne) {
  Matrix x(1, 2);
  x << 0.5, 0.5;
  const KernelSupportModel model = fit_kernel_support(x, KernelSpec{1.0}, KernelFitOptions{std::nullopt, 1e-10});
  ASSERT_EQ(model.m(), 1);
  EXPECT_NEAR(model.eigvals(0), 2.0, 1e-12);
}

TEST(FitKernelSupport, AutoKeepsTrainingScoresSmall) {
  const Matrix x = uniform_points(2, 50, 1);
  const KernelSupportModel model = fit_kernel_support(x, KernelSpec{median_bandwidth(x)});
  EXPECT_LE(model.m(), 50);
  for (Eigen::Index i = 0; i < x.cols(); ++i) EXPECT_LE(kernel_score(model, x.col(i)), 1e-6);
}

TEST(FitKernelSupport, AutoCapturesTraceFraction) {
  const Matrix x = uniform_points(2, 40, 2);
  const KernelSpec spec{median_bandwidth(x)};
  const KernelSupportModel model = fit_kernel_support(x, spec);
  const double trace = kernel_matrix(x, spec).trace();
  EXPECT_GE(model.eigvals.sum(), kAutoTraceFraction * trace - 1e-9);
  if (model.m() > 1) {
    EXPECT_LT(model.eigvals.head(model.m() - 1).sum(), kAutoTraceFraction * trace);
  }
}

TEST(FitKernelSupport, Errors) {
  const Matrix x = uniform_points(2, 5, 3);
  EXPECT_EQ(kind_of([&] { fit_kernel_support(x, KernelSpec{1.0}, KernelFitOptions{0, std::nullopt}); }),
            "InvalidComponents");
  EXPECT_EQ(kind_of([&] { fit_kernel_support(x, KernelSpec{1.0}, KernelFitOptions{6, std::nullopt}); }),
            "InvalidComponents");
  EXPECT_EQ(kind_of([&] { fit_kernel_support(x, KernelSpec{1.0}, KernelFitOptions{std::nullopt, -1.0}); }),
            "InvalidRidge");
  EXPECT_EQ(kind_of([&] { fit_kernel_support(x, KernelSpec{1.0}, KernelFitOptions{std::nullopt, 100.0}); }),
            "NoComponents");
  EXPECT_THROW(fit_kernel_support(Matrix(2, 0), KernelSpec{1.0}), Error);
}

TEST(KernelScore, TrainingPointsMatchLinearSolveOracle) {
  const Matrix x = uniform_points(2, 50, 4);
  const KernelSpec spec{median_bandwidth(x)};
  const KernelSupportModel model = fit_kernel_support(x, spec, KernelFitOptions{50, 1e-10});
  const Matrix k = kernel_matrix(x, spec);
  const Eigen::FullPivLU<Matrix> lu(k);
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    EXPECT_LE(kernel_score(model, x.col(i)), 1e-6);
    EXPECT_TRUE(membership(model, x.col(i), 1e-4));
  }
  const Matrix probes = uniform_points(2, 10, 5, -2.0, 2.0);
  for (Eigen::Index j = 0; j < probes.cols(); ++j) {
    const Vector kx = model.kernel_vector(probes.col(j));
    const double oracle = std::clamp(1.0 - kx.dot(lu.solve(kx)), 0.0, 1.0);
    EXPECT_NEAR(kernel_score(model, probes.col(j)), oracle, 1e-7);
  }
}

TEST(KernelScore, FarPointsApproachOne) {
  const Matrix x = uniform_points(2, 30, 6);
  const double sigma = median_bandwidth(x);
  const KernelSupportModel model = fit_kernel_support(x, KernelSpec{sigma});
  const Vector far = Vector::Constant(2, 50.0 * sigma);
  EXPECT_GE(kernel_score(model, far), 0.99);
  EXPECT_FALSE(membership(model, far, 0.5));
  EXPECT_EQ(kind_of([&] { membership(model, far, 0.0); }), "InvalidThreshold");
  EXPECT_EQ(kind_of([&] { kernel_score(model, Vector::Zero(3)); }), "ShapeMismatch");
}

TEST(KernelScore, RangeIsUnitInterval) {
  const Matrix x = uniform_points(3, 25, 7);
  for (auto form : {KernelExponent::euclidean_norm, KernelExponent::squared_norm}) {
    const KernelSupportModel model = fit_kernel_support(x, KernelSpec{median_bandwidth(x), form});
    const Matrix probes = uniform_points(3, 200, 8, -3.0, 3.0);
    for (Eigen::Index j = 0; j < probes.cols(); ++j) {
      const double s = kernel_score(model, probes.col(j));
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
  }
}

TEST(KernelModel, EigenpairResidualAndOrthonormality) {
  const Matrix x = uniform_points(2, 40, 9);
  const KernelSpec spec{median_bandwidth(x)};
  const KernelSupportModel model = fit_kernel_support(x, spec, KernelFitOptions{40, 1e-12});
  const Matrix k = kernel_matrix(x, spec);
  const double knorm = k.norm();
  for (int i = 0; i < model.m(); ++i) {
    const Vector r = k * model.eigvecs.col(i) - model.eigvals(i) * model.eigvecs.col(i);
    EXPECT_LE(r.norm(), 1e-8 * knorm);
    EXPECT_GT(model.eigvals(i), model.ridge);
    if (i > 0) EXPECT_GE(model.eigvals(i - 1), model.eigvals(i));
  }
  const Matrix gram = model.eigvecs.transpose() * model.eigvecs;
  EXPECT_LE((gram - Matrix::Identity(model.m(), model.m())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KernelModel, MonotoneInComponents) {
  const Matrix x = uniform_points(2, 30, 10);
  const KernelSpec spec{median_bandwidth(x)};
  const Matrix probes = uniform_points(2, 50, 11, -1.5, 1.5);
  std::vector<KernelSupportModel> models;
  for (int m = 1; m <= 30; m += 4) models.push_back(fit_kernel_support(x, spec, KernelFitOptions{m, 1e-12}));
  for (Eigen::Index j = 0; j < probes.cols(); ++j) {
    for (std::size_t i = 1; i < models.size(); ++i) {
      EXPECT_LE(kernel_score(models[i], probes.col(j)), kernel_score(models[i - 1], probes.col(j)) + 1e-10);
    }
  }
}

TEST(KernelModel, PermutationInvariant) {
  const Matrix x = uniform_points(2, 30, 12);
  std::vector<int> order(30);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
  Matrix shuffled(2, 30);
  for (int i = 0; i < 30; ++i) shuffled.col(i) = x.col(order[static_cast<std::size_t>(i)]);
  const KernelSpec spec{median_bandwidth(x)};
  const KernelSupportModel a = fit_kernel_support(x, spec, KernelFitOptions{20, std::nullopt});
  const KernelSupportModel b = fit_kernel_support(shuffled, spec, KernelFitOptions{20, std::nullopt});
  const Matrix probes = uniform_points(2, 50, 13, -1.5, 1.5);
  for (Eigen::Index j = 0; j < probes.cols(); ++j) {
    EXPECT_NEAR(kernel_score(a, probes.col(j)), kernel_score(b, probes.col(j)), 1e-9);
  }
}

TEST(KernelModel, SeparatesSupportFromFarRegion) {
  const Matrix x = uniform_points(1, 200, 14);
  const KernelSupportModel model = fit_kernel_support(x, KernelSpec{median_bandwidth(x)});
  auto median_score = [&](const Matrix& pts) {
    std::vector<double> s;
    for (Eigen::Index j = 0; j < pts.cols(); ++j) s.push_back(kernel_score(model, pts.col(j)));
    std::nth_element(s.begin(), s.begin() + 50, s.end());
    return s[50];
  };
  EXPECT_LT(median_score(uniform_points(1, 100, 15)), median_score(uniform_points(1, 100, 16, 2.0, 3.0)));
}

TEST(KernelModel, JsonRoundTripIsValueExact) {
  const Matrix x = uniform_points(2, 12, 17);
  const KernelSupportModel model =
      fit_kernel_support(x, KernelSpec{median_bandwidth(x), KernelExponent::squared_norm});
  const nlohmann::json j = to_json(model);
  EXPECT_EQ(j.at("format_version"), 1);
  const KernelSupportModel back = kernel_model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.points, model.points);
  EXPECT_EQ(back.eigvals, model.eigvals);
  EXPECT_EQ(back.eigvecs, model.eigvecs);
  EXPECT_EQ(back.ridge, model.ridge);
  EXPECT_EQ(back.spec.bandwidth, model.spec.bandwidth);
  EXPECT_EQ(back.spec.exponent, model.spec.exponent);
  const Vector q = vec({0.3, -0.2});
  EXPECT_EQ(kernel_score(back, q), kernel_score(model, q));
}

TEST(KernelModel, JsonRejectsWrongVersion) {
  nlohmann::json j = to_json(fit_kernel_support(vec({0.0}), KernelSpec{1.0}));
  j["format_version"] = 2;
  EXPECT_THROW(kernel_model_from_json(j), Error);
}

}  // namespace
}  // namespace red
