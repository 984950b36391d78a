#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "cpe/data.hpp"

using namespace cpe;

TEST_CASE("fourier features at x=0") {
  const auto phi = fourier_features(0.0, 10);
  CHECK(phi[0] == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
  for (int k = 2; k <= 10; ++k) {
    if (k % 2 == 1) {
      CHECK(phi[k - 1] == doctest::Approx(0.0));  // sin(0)
    } else {
      CHECK(phi[k - 1] ==
            doctest::Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-15));  // cos(0)
    }
  }
  const auto phi1 = fourier_features(0.0, 1);
  CHECK(phi1.size() == 1);
  CHECK(phi1[0] == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-15));
}

TEST_CASE("fourier features: squared norm recomputed directly, boundedness") {
  RandomStream rng(2, 0);
  for (int t = 0; t < 100; ++t) {
    const double x = rng.uniform(-1.0, 1.0);
    const auto phi = fourier_features(x, 12);
    double direct = 1.0 / (2.0 * std::numbers::pi);
    for (int k = 2; k <= 12; ++k) {
      const double g = (k % 2 == 1) ? std::sin(k * x) : std::cos(k * x);
      direct += g * g / std::numbers::pi;
    }
    CHECK(phi.squaredNorm() == doctest::Approx(direct).epsilon(1e-12));
    for (int k = 2; k <= 12; ++k) {
      CHECK(std::abs(phi[k - 1]) <= 1.0 / std::sqrt(std::numbers::pi) + 1e-15);
    }
  }
  CHECK_THROWS(fourier_features(1.5, 4));
  CHECK_THROWS(fourier_features(0.0, 0));
}

namespace {

DataGenSpec ones_spec(int order, double noise_var) {
  DataGenSpec s;
  s.basis_order_true = order;
  s.true_coeffs = Eigen::VectorXd::Ones(order);
  s.noise_var_true = noise_var;
  return s;
}

}  // namespace

TEST_CASE("sample_dataset: empty, noiseless, reproducible") {
  const DataGenSpec spec = ones_spec(10, 1.0);
  RandomStream rng(3, 0);
  const Dataset empty = sample_dataset(spec, 0, rng);
  CHECK(empty.size() == 0);

  const DataGenSpec clean = ones_spec(6, 1e-30);
  RandomStream rng2(3, 1);
  const Dataset d = sample_dataset(clean, 40, rng2);
  for (int i = 0; i < d.size(); ++i) {
    const double m = clean.true_coeffs.dot(fourier_features(d.xs[i], 6));
    CHECK(std::abs(d.ys[i] - m) <= 1e-10);
    CHECK(d.xs[i] >= -1.0);
    CHECK(d.xs[i] <= 1.0);
  }

  RandomStream a(7, 5), b(7, 5);
  const Dataset da = sample_dataset(spec, 100, a);
  const Dataset db = sample_dataset(spec, 100, b);
  CHECK((da.xs - db.xs).norm() == 0.0);
  CHECK((da.ys - db.ys).norm() == 0.0);
}

TEST_CASE("sample_dataset: residual variance obeys the law of large numbers") {
  const DataGenSpec spec = ones_spec(10, 1.0);
  RandomStream rng(11, 0);
  const Dataset d = sample_dataset(spec, 100000, rng);
  double ss = 0.0;
  for (int i = 0; i < d.size(); ++i) {
    const double r = d.ys[i] - true_conditional(spec, d.xs[i]).mean;
    ss += r * r;
  }
  CHECK(std::abs(ss / d.size() - 1.0) < 0.05);
}

TEST_CASE("true_conditional values") {
  const DataGenSpec spec = ones_spec(10, 1.0);
  const auto c = true_conditional(spec, 0.0);
  CHECK(c.mean == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi) +
                                  5.0 / std::sqrt(std::numbers::pi))
                      .epsilon(1e-14));
  CHECK(c.var == 1.0);

  DataGenSpec zero = spec;
  zero.true_coeffs.setZero();
  const auto cz = true_conditional(zero, 0.4);
  CHECK(cz.mean == 0.0);
  CHECK(cz.var == 1.0);
}

TEST_CASE("true_conditional matches the Monte Carlo mean of samples") {
  const DataGenSpec spec = ones_spec(8, 0.5);
  RandomStream rng(13, 0);
  const int n = 100000;
  const double x = 0.31;
  double s = 0.0;
  const double sd = std::sqrt(spec.noise_var_true);
  const double m = true_conditional(spec, x).mean;
  for (int i = 0; i < n; ++i) s += m + sd * rng.normal();
  const double mc = s / n;
  CHECK(std::abs(mc - m) <= 4.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("mirror_invariant_spec zeroes the sine components") {
  const DataGenSpec spec = mirror_invariant_spec(10, 1.0);
  Eigen::VectorXd expected(10);
  expected << 1, 1, 0, 1, 0, 1, 0, 1, 0, 1;
  CHECK((spec.true_coeffs - expected).norm() == 0.0);

  CHECK(true_conditional(spec, 0.37).mean ==
        doctest::Approx(true_conditional(spec, -0.37).mean).epsilon(1e-14));

  const DataGenSpec ones = ones_spec(10, 1.0);
  CHECK(std::abs(true_conditional(ones, 0.37).mean -
                 true_conditional(ones, -0.37).mean) > 1e-3);
}

TEST_CASE("mirror invariance holds at 200 random points") {
  const DataGenSpec spec = mirror_invariant_spec(12, 0.7);
  RandomStream rng(29, 0);
  for (int t = 0; t < 200; ++t) {
    const double x = rng.uniform(-1.0, 1.0);
    const auto a = true_conditional(spec, x);
    const auto b = true_conditional(spec, -x);
    CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-14));
    CHECK(a.var == b.var);
  }
}

TEST_CASE("transform sets: weights and membership") {
  const TransformSet id = TransformSet::identity_only();
  CHECK(id.size() == 1);
  CHECK(id.weights.sum() == doctest::Approx(1.0));

  const TransformSet im = TransformSet::identity_mirror();
  CHECK(im.size() == 2);
  CHECK(im.weights.sum() == doctest::Approx(1.0));
  CHECK(im.transforms[1].map(0.25) == doctest::Approx(-0.25));
  for (const auto& t : im.transforms) {
    for (double x = -1.0; x <= 1.0; x += 0.125) {
      const double y = t.map(x);
      CHECK(y >= -1.0);
      CHECK(y <= 1.0);
    }
  }
  CHECK_THROWS(TransformSet::from_names({"identity"}, {0.5}));
  CHECK_THROWS(TransformSet::from_names({"rotate"}));
  CHECK_THROWS(TransformSet::from_names({"identity", "mirror"}, {0.9, 0.2}));
}

TEST_CASE("dataset CSV round trip at full precision") {
  const DataGenSpec spec = ones_spec(10, 1.0);
  RandomStream rng(31, 0);
  const Dataset d = sample_dataset(spec, 25, rng);
  std::stringstream ss;
  write_dataset_csv(d, ss);
  const std::string text = ss.str();
  CHECK(text.substr(0, 4) == "x,y\n");
  std::stringstream in(text);
  const Dataset back = read_dataset_csv(in);
  REQUIRE(back.size() == d.size());
  CHECK((back.xs - d.xs).norm() == 0.0);
  CHECK((back.ys - d.ys).norm() == 0.0);
}
