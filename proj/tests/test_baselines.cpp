#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

#include "lcs/baselines.hpp"
#include "lcs/dataset.hpp"

using namespace lcs;

namespace {

Eigen::MatrixXd random_points(Eigen::Index dim, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(dim, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

std::optional<Errc> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

double trilinear_fn(double x, double y, double z) {
  return 0.3 - 1.2 * x + 0.7 * y + 2.1 * z + 0.4 * x * y - 0.9 * y * z + 1.3 * x * z - 0.6 * x * y * z;
}

}  // namespace

TEST(Kernel, ClosedForms) {
  const double r = 2.0, e = 0.5;
  EXPECT_DOUBLE_EQ(rbf_phi(RbfKernel::Linear, r, e), 2.0);
  EXPECT_DOUBLE_EQ(rbf_phi(RbfKernel::Cubic, r, e), 8.0);
  EXPECT_DOUBLE_EQ(rbf_phi(RbfKernel::Quintic, r, e), 32.0);
  EXPECT_DOUBLE_EQ(rbf_phi(RbfKernel::Multiquadric, r, e), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(rbf_phi(RbfKernel::InverseMultiquadric, r, e), 1.0 / std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(rbf_phi(RbfKernel::Gaussian, r, e), std::exp(-1.0));
}

TEST(Kernel, NamesRoundTrip) {
  for (auto k : kAllKernels) EXPECT_EQ(parse_kernel(to_string(k)), k);
  EXPECT_EQ(code_of([] { parse_kernel("thin_plate_banana"); }), Errc::Parse);
  EXPECT_TRUE(uses_epsilon(RbfKernel::Gaussian));
  EXPECT_FALSE(uses_epsilon(RbfKernel::Cubic));
}

TEST(Rbf, InterpolatesCentersForEveryKernel) {
  const auto x = random_points(3, 60, 1);
  const auto y = random_points(2, 60, 2);
  for (auto k : kAllKernels) {
    const auto m = rbf_fit(x, y, k);
    const Eigen::MatrixXd got = m.eval_batch(x);
    EXPECT_LT((got - y).cwiseAbs().maxCoeff(), 1e-6) << to_string(k);
    for (Eigen::Index c = 0; c < 5; ++c) EXPECT_EQ(m.eval(x.col(c)), got.col(c)) << to_string(k);
  }
}

TEST(Rbf, DefaultEpsilonIsInverseMeanNearestDistance) {
  const auto x = random_points(3, 40, 3);
  const auto m = rbf_fit(x, random_points(1, 40, 4), RbfKernel::Gaussian);
  // Brute force: nearest neighbour by sorting every distance row.
  double sum = 0;
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    std::vector<double> d;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      if (j != i) d.push_back((x.col(i) - x.col(j)).norm());
    std::sort(d.begin(), d.end());
    sum += d.front();
  }
  EXPECT_NEAR(m.epsilon, static_cast<double>(x.cols()) / sum, 1e-12);
  EXPECT_NEAR(1.0 / mean_nearest_distance(x), m.epsilon, 1e-12);
  EXPECT_EQ(rbf_fit(x, random_points(1, 40, 4), RbfKernel::Gaussian, 2.5).epsilon, 2.5);
}

TEST(Rbf, SmoothFunctionGeneralizes) {
  const auto x = random_points(3, 400, 5);
  auto f = [](const Eigen::VectorXd& p) { return std::sin(2 * p(0)) + p(1) * p(2); };
  Eigen::MatrixXd y(1, x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) y(0, c) = f(x.col(c));
  const auto m = rbf_fit(x, y, RbfKernel::Cubic);
  const auto q = random_points(3, 100, 6);
  double worst = 0;
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    const Eigen::Vector3d p = 0.1 * Eigen::Vector3d::Ones() + 0.8 * Eigen::Vector3d(q.col(c));
    worst = std::max(worst, std::abs(m.eval(p)(0) - f(p)));
  }
  EXPECT_LT(worst, 1e-2);
}

TEST(Rbf, Errors) {
  Eigen::MatrixXd x = random_points(3, 5, 7);
  x.col(3) = x.col(1);
  EXPECT_EQ(code_of([&] { rbf_fit(x, random_points(1, 5, 8), RbfKernel::Cubic); }), Errc::DuplicateCenters);
  EXPECT_EQ(code_of([&] { rbf_fit(random_points(3, 5, 7), random_points(1, 4, 8), RbfKernel::Cubic); }), Errc::SizeMismatch);
  EXPECT_EQ(code_of([&] { rbf_fit(random_points(3, 1, 7), random_points(1, 1, 8), RbfKernel::Cubic); }), Errc::BadSize);
  const auto m = rbf_fit(random_points(3, 5, 7), random_points(1, 5, 8), RbfKernel::Cubic);
  EXPECT_EQ(code_of([&] { m.eval(Eigen::VectorXd::Zero(4)); }), Errc::DimensionMismatch);
}

TEST(Rbf, IllConditionedFallsBackToRegularization) {
  // A nearly flat Gaussian makes Phi numerically rank deficient.
  const auto x = random_points(3, 80, 9);
  const auto y = random_points(1, 80, 10);
  const auto m = rbf_fit(x, y, RbfKernel::Gaussian, 1e-3);
  EXPECT_TRUE(m.regularized);
  EXPECT_TRUE(m.weights.allFinite());
  EXPECT_FALSE(rbf_fit(x, y, RbfKernel::Cubic).regularized);
}

TEST(Rbf, JsonRoundTripBitExact) {
  const auto m = rbf_fit(random_points(4, 12, 11), random_points(3, 12, 12), RbfKernel::Multiquadric);
  const auto back = nlohmann::json::parse(nlohmann::json(m).dump()).get<RbfModel>();
  EXPECT_EQ(back.kernel, m.kernel);
  EXPECT_EQ(back.epsilon, m.epsilon);
  EXPECT_EQ(back.centers, m.centers);
  EXPECT_EQ(back.weights, m.weights);
}

TEST(Grid, ReproducesTrilinearFunctions) {
  const std::array<std::vector<double>, 3> axes{std::vector<double>{0, 0.3, 1.1, 2},
                                                std::vector<double>{-1, 0.5, 1},
                                                std::vector<double>{0, 1, 1.5, 4, 5}};
  std::vector<std::array<double, 3>> pts;
  for (double a : axes[0])
    for (double b : axes[1])
      for (double c : axes[2]) pts.push_back({a, b, c});
  std::mt19937_64 rng(13);
  std::shuffle(pts.begin(), pts.end(), rng);
  Eigen::MatrixXd vals(1, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) vals(0, static_cast<Eigen::Index>(i)) = trilinear_fn(pts[i][0], pts[i][1], pts[i][2]);
  const auto g = grid_fit(pts, vals);
  // Trilinear in each cell reproduces functions that are linear along every axis.
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 500; ++t) {
    const double x = 2 * u(rng), y = -1 + 2 * u(rng), z = 5 * u(rng);
    EXPECT_NEAR(g.eval({x, y, z})(0), trilinear_fn(x, y, z), 1e-12);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(g.eval(pts[i])(0), vals(0, static_cast<Eigen::Index>(i)));
  EXPECT_EQ(code_of([&] { g.eval({2.0001, 0, 0}); }), Errc::OutOfDomain);
  EXPECT_EQ(code_of([&] { g.eval({0, -1.5, 0}); }), Errc::OutOfDomain);
}

TEST(Grid, IncompleteLatticeRejected) {
  std::vector<std::array<double, 3>> pts;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) pts.push_back({double(a), double(b), double(c)});
  pts.pop_back();
  EXPECT_EQ(code_of([&] { grid_fit(pts, Eigen::MatrixXd::Zero(1, 7)); }), Errc::IncompleteGrid);
  pts.push_back(pts.front());
  EXPECT_EQ(code_of([&] { grid_fit(pts, Eigen::MatrixXd::Zero(1, 8)); }), Errc::IncompleteGrid);
  EXPECT_EQ(code_of([&] { grid_fit({}, Eigen::MatrixXd::Zero(1, 0)); }), Errc::EmptyDataset);
}

TEST(Grid, JsonRoundTrip) {
  const auto recs = generate(27, SampleMode::Grid, NoiseModel::none(), DeviceConfig{}, 1);
  const auto g = fit_grid_direct(recs).grid;
  const auto back = nlohmann::json::parse(nlohmann::json(g).dump()).get<GridModel>();
  EXPECT_EQ(back.axes, g.axes);
  EXPECT_EQ(back.values, g.values);
  auto j = nlohmann::json(g);
  j["values"].erase(0);
  EXPECT_THROW(j.get<GridModel>(), Error);
}

TEST(Direct, BaselinesReproduceTrainingStates) {
  const auto grid = generate(125, SampleMode::Grid, NoiseModel::none(), DeviceConfig{}, 2);
  const auto gd = fit_grid_direct(grid);
  for (const auto& r : grid) EXPECT_LT(infidelity(gd.predict(r.voltages), r.state), 1e-12);
  const auto rnd = generate(200, SampleMode::Random, NoiseModel::none(), DeviceConfig{}, 3);
  const auto rd = fit_rbf_direct(rnd, RbfKernel::Cubic);
  for (const auto& r : rnd) EXPECT_LT(infidelity(rd.predict(r.voltages), r.state), 1e-8);
}

TEST(Compound, RbfVoltagesClampedAndRoundTripOnTrain) {
  const auto rnd = generate(300, SampleMode::Random, NoiseModel::none(), DeviceConfig{}, 4);
  const auto dir = fit_rbf_direct(rnd, RbfKernel::Cubic);
  const auto comp = fit_rbf_compound(rnd, dir, RbfKernel::Cubic);
  for (const auto& r : rnd) {
    const auto v = comp.predict_voltages(r.state);
    EXPECT_TRUE(v.in_range());
    EXPECT_LT(infidelity(comp.reconstruct(r.state), r.state), 1e-6);
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    Eigen::Vector3d b(g(rng), g(rng), g(rng));
    b *= std::abs(std::sin(g(rng))) / b.norm();
    const DensityMatrix s = rho_from_bloch({b(0), b(1), b(2)});
    EXPECT_TRUE(comp.predict_voltages(s).in_range());
  }
}

TEST(Compound, GridInverseUsesNearestTrainingState) {
  const auto grid = generate(64, SampleMode::Grid, NoiseModel::none(), DeviceConfig{}, 6);
  const auto dir = fit_grid_direct(grid);
  const auto train = generate(500, SampleMode::Random, NoiseModel::none(), DeviceConfig{}, 7);
  const auto comp = fit_grid_compound(train, dir, 3);
  ASSERT_EQ(comp.inverse.axes[0].size(), 3u);
  // Node (0, 0, 0) of the Bloch cube is the centre; its voltages come from the
  // training state with the shortest Bloch vector.
  std::size_t best = 0;
  for (std::size_t i = 1; i < train.size(); ++i) {
    const auto b = bloch_from_rho(train[i].state), c = bloch_from_rho(train[best].state);
    if (b.norm() < c.norm()) best = i;
  }
  const auto v = comp.predict_voltages(states::maximally_mixed());
  EXPECT_NEAR(v.v1, train[best].voltages.v1, 1e-12);
  EXPECT_NEAR(v.v2, train[best].voltages.v2, 1e-12);
  EXPECT_NEAR(v.v3, train[best].voltages.v3, 1e-12);
  EXPECT_EQ(fit_grid_compound(train, dir).inverse.axes[0].size(), 7u);
  EXPECT_EQ(code_of([&] { fit_grid_compound({}, dir); }), Errc::EmptyDataset);
  EXPECT_EQ(code_of([&] { fit_grid_compound(train, dir, 1); }), Errc::BadGridSize);
}

TEST(Compound, JsonRoundTrip) {
  const auto rnd = generate(40, SampleMode::Random, NoiseModel::none(), DeviceConfig{}, 8);
  const auto dir = fit_rbf_direct(rnd, RbfKernel::Linear);
  const auto comp = fit_rbf_compound(rnd, dir, RbfKernel::Linear);
  const auto back = nlohmann::json::parse(nlohmann::json(comp).dump()).get<RbfCompound>();
  for (const auto& r : rnd) EXPECT_EQ(back.reconstruct(r.state).elements(), comp.reconstruct(r.state).elements());
}

TEST(Rbf, HandSolvedTwoCenterLinear) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  x(0, 1) = 1;
  const Eigen::MatrixXd y = (Eigen::MatrixXd(1, 2) << 0, 1).finished();
  const auto m = rbf_fit(x, y, RbfKernel::Linear);
  EXPECT_NEAR(m.weights(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(m.weights(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(m.eval(Eigen::VectorXd(Eigen::Vector3d(0.5, 0, 0)))(0), 0.5, 1e-15);
  EXPECT_NEAR(m.eval(Eigen::VectorXd(Eigen::Vector3d(2, 0, 0)))(0), 2.0, 1e-15);
}

TEST(Grid, CellCenterIsCornerMean) {
  const auto recs = generate(27, SampleMode::Grid, NoiseModel::none(), DeviceConfig{}, 1);
  const auto g = fit_grid_direct(recs).grid;
  const auto& a = g.axes;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 2; ++k) mean += g.values.col(static_cast<Eigen::Index>(g.node_index(i, j, k))) / 8.0;
  const auto got = g.eval({(a[0][0] + a[0][1]) / 2, (a[1][0] + a[1][1]) / 2, (a[2][0] + a[2][1]) / 2});
  EXPECT_LT((got - mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(code_of([&] { g.eval({10.0001, 5, 5}); }), Errc::OutOfDomain);
}

TEST(Direct, CubicRbfBeatsTrilinearAtEqualCount) {
  const auto grid = generate(1000, SampleMode::Grid, NoiseModel::none(), DeviceConfig{}, 21);
  const auto rnd = generate(1000, SampleMode::Random, NoiseModel::none(), DeviceConfig{}, 22);
  const auto test = generate(500, SampleMode::Random, NoiseModel::none(), DeviceConfig{}, 23);
  const auto gd = fit_grid_direct(grid);
  const auto rd = fit_rbf_direct(rnd, RbfKernel::Cubic);
  double eg = 0, er = 0;
  for (const auto& r : test) {
    eg += infidelity(gd.predict(r.voltages), r.state);
    er += infidelity(rd.predict(r.voltages), r.state);
  }
  EXPECT_LT(er, eg);
}
