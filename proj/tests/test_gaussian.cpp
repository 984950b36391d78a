#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cpe/gaussian.hpp"
#include "oracles.hpp"

using namespace cpe;

namespace {

Gaussian random_spd_gaussian(int dim, RandomStream& rng, double scale = 1.0) {
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  }
  Eigen::MatrixXd cov = scale * (a * a.transpose()) +
                        0.5 * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd mean(dim);
  for (int i = 0; i < dim; ++i) mean[i] = rng.normal();
  return Gaussian::from_moments(mean, cov);
}

QuadraticForm random_quadratic(int dim, RandomStream& rng) {
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  }
  QuadraticForm q;
  q.A = 0.5 * (a + a.transpose());
  q.b.resize(dim);
  for (int i = 0; i < dim; ++i) q.b[i] = rng.normal();
  q.c = rng.normal();
  return q;
}

}  // namespace

TEST_CASE("structure invariants of a constructed Gaussian") {
  RandomStream rng(5, 1);
  const Gaussian g = random_spd_gaussian(6, rng);
  CHECK((g.cov - g.cov.transpose()).norm() <= 1e-12 * g.cov.norm());
  CHECK((g.chol * g.chol.transpose() - g.cov).norm() <= 1e-10 * g.cov.norm());
  for (int i = 0; i < g.dim(); ++i) CHECK(g.chol(i, i) > 0.0);
}

TEST_CASE("log_density at the mean of a standard normal") {
  const Gaussian g = Gaussian::isotropic(2, 0.0, 1.0);
  CHECK(log_density(g, Eigen::Vector2d::Zero()) ==
        doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("log_density of 1-D N(0,2) at x=1") {
  const Gaussian g = Gaussian::isotropic(1, 0.0, 2.0);
  Eigen::VectorXd x(1);
  x[0] = 1.0;
  CHECK(log_density(g, x) ==
        doctest::Approx(-0.5 * std::log(4.0 * std::numbers::pi) - 0.25).epsilon(1e-14));
}

TEST_CASE("log_density matches a naive determinant-and-inverse evaluation") {
  RandomStream rng(17, 0);
  const Gaussian g = random_spd_gaussian(3, rng);
  Eigen::Vector3d x(0.3, -1.2, 0.7);
  const double naive = -0.5 * (3.0 * std::log(2.0 * std::numbers::pi) +
                               std::log(g.cov.determinant()) +
                               (x - g.mean).dot(g.cov.inverse() * (x - g.mean)));
  CHECK(log_density(g, x) == doctest::Approx(naive).epsilon(1e-10));
  CHECK_THROWS(log_density(g, Eigen::Vector2d::Zero()));
}

TEST_CASE("log_density integrates to 1 on dense grids (dim 1 and 2)") {
  RandomStream rng(23, 0);
  const Gaussian g1 = random_spd_gaussian(1, rng, 0.5);
  double acc = 0.0;
  const int pts = 20001;
  const double lo = g1.mean[0] - 12.0 * g1.chol(0, 0);
  const double hi = g1.mean[0] + 12.0 * g1.chol(0, 0);
  const double h = (hi - lo) / (pts - 1);
  for (int i = 0; i < pts; ++i) {
    Eigen::VectorXd x(1);
    x[0] = lo + i * h;
    acc += ((i == 0 || i == pts - 1) ? 0.5 : 1.0) * std::exp(log_density(g1, x));
  }
  CHECK(acc * h == doctest::Approx(1.0).epsilon(1e-4));

  const Gaussian g2 = Gaussian::from_moments(Eigen::Vector2d(0.4, -0.2),
                                             (Eigen::Matrix2d() << 1.0, 0.6, 0.6, 2.0)
                                                 .finished());
  const int pts2 = 801;
  const double lo2 = -12.0, hi2 = 12.0;
  const double h2 = (hi2 - lo2) / (pts2 - 1);
  double acc2 = 0.0;
  for (int i = 0; i < pts2; ++i) {
    for (int j = 0; j < pts2; ++j) {
      const double wi = (i == 0 || i == pts2 - 1) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == pts2 - 1) ? 0.5 : 1.0;
      acc2 += wi * wj *
              std::exp(log_density(g2, Eigen::Vector2d(lo2 + i * h2, lo2 + j * h2)));
    }
  }
  CHECK(acc2 * h2 * h2 == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("sampling: Dirac-like covariance pins every row to the mean") {
  const Gaussian g = Gaussian::isotropic(3, 2.5, 1e-30);
  RandomStream rng(1, 2);
  const Eigen::MatrixXd rows = sample(g, rng, 50);
  for (int i = 0; i < rows.rows(); ++i) {
    CHECK((rows.row(i).transpose() - g.mean).norm() <= 1e-10);
  }
}

TEST_CASE("sampling: law of large numbers at 1e5 draws") {
  const Gaussian g = Gaussian::isotropic(1, 0.0, 1.0);
  RandomStream rng(42, 3);
  const Eigen::MatrixXd rows = sample(g, rng, 100000);
  const double mean = rows.col(0).mean();
  const double var = (rows.col(0).array() - mean).square().sum() / (rows.rows() - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("sampling: same seed twice gives identical matrices") {
  RandomStream rng1(9, 4);
  RandomStream rng2(9, 4);
  const Gaussian g = Gaussian::isotropic(4, 1.0, 2.0);
  CHECK((sample(g, rng1, 20) - sample(g, rng2, 20)).norm() == 0.0);
}

TEST_CASE("KL divergence closed form") {
  const Gaussian p = Gaussian::isotropic(3, 0.5, 1.3);
  CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-14));

  const Gaussian q1 = Gaussian::isotropic(1, 0.0, 1.0);
  const Gaussian p1 = Gaussian::isotropic(1, 0.0, 2.0);
  CHECK(kl_divergence(q1, p1) ==
        doctest::Approx(0.5 * (0.5 - 1.0 + std::log(2.0))).epsilon(1e-12));

  const Gaussian q2 = Gaussian::isotropic(1, 1.0, 1.0);
  CHECK(kl_divergence(q2, q1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS(kl_divergence(q1, p));
}

TEST_CASE("KL against numerical integration of q ln(q/p) in 1-D") {
  const Gaussian q = Gaussian::isotropic(1, 0.0, 1.0);
  const Gaussian p = Gaussian::isotropic(1, 0.0, 2.0);
  double acc = 0.0;
  const int pts = 40001;
  const double lo = -14.0, hi = 14.0, h = (hi - lo) / (pts - 1);
  for (int i = 0; i < pts; ++i) {
    Eigen::VectorXd x(1);
    x[0] = lo + i * h;
    const double lq = log_density(q, x);
    const double lp = log_density(p, x);
    acc += ((i == 0 || i == pts - 1) ? 0.5 : 1.0) * std::exp(lq) * (lq - lp);
  }
  CHECK(kl_divergence(q, p) == doctest::Approx(acc * h).epsilon(1e-9));
}

TEST_CASE("KL is nonnegative on 1000 random SPD pairs") {
  RandomStream rng(77, 0);
  for (int t = 0; t < 1000; ++t) {
    const int dim = 1 + static_cast<int>(rng.uniform01() * 4.0);
    const Gaussian q = random_spd_gaussian(dim, rng);
    const Gaussian p = random_spd_gaussian(dim, rng);
    CHECK(kl_divergence(q, p) >= -1e-12);
  }
}

TEST_CASE("conjugate posterior: lambda=0 returns the prior exactly") {
  RandomStream rng(4, 0);
  const Gaussian prior = random_spd_gaussian(3, rng);
  Eigen::MatrixXd design(2, 3);
  design << 1, 0, 1, 0, 2, -1;
  Eigen::VectorXd y(2);
  y << 3.0, -1.0;
  const Gaussian post = linear_gaussian_posterior(prior, design, y, 0.5, 0.0);
  CHECK((post.mean - prior.mean).norm() <= 1e-14);
  CHECK((post.cov - prior.cov).norm() <= 1e-14);
}

TEST_CASE("conjugate posterior: 1-D textbook cases at lambda 1 and 2") {
  const Gaussian prior = Gaussian::isotropic(1, 0.0, 1.0);
  Eigen::MatrixXd design(1, 1);
  design << 1.0;
  Eigen::VectorXd y(1);
  y << 2.0;

  const Gaussian p1 = linear_gaussian_posterior(prior, design, y, 1.0, 1.0);
  CHECK(p1.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p1.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  const Gaussian p2 = linear_gaussian_posterior(prior, design, y, 1.0, 2.0);
  CHECK(p2.mean[0] == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(p2.cov(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("conjugate posterior matches the dense-grid normalization oracle") {
  // Tempered 1-D posterior: exponent lambda on the likelihood.
  const Gaussian prior = Gaussian::isotropic(1, 0.0, 1.0);
  Eigen::MatrixXd design(1, 1);
  design << 1.0;
  Eigen::VectorXd y(1);
  y << 2.0;
  for (const double lambda : {0.5, 1.0, 2.0}) {
    const Gaussian post = linear_gaussian_posterior(prior, design, y, 1.0, lambda);
    const auto log_unnorm = [&](double th) {
      return lambda * oracle::log_normal_pdf(2.0, th, 1.0) +
             oracle::log_normal_pdf(th, 0.0, 1.0);
    };
    const auto m = oracle::grid_moments_1d(log_unnorm, -20.0, 20.0, 400001);
    CHECK(post.mean[0] == doctest::Approx(m.mean).epsilon(1e-8));
    CHECK(post.cov(0, 0) == doctest::Approx(m.var).epsilon(1e-6));
  }
}

TEST_CASE("posterior is continuous in lambda") {
  RandomStream rng(31, 0);
  const Gaussian prior = Gaussian::isotropic(4, 0.0, 2.0);
  Eigen::MatrixXd design(6, 4);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 4; ++j) design(i, j) = rng.normal();
  }
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) y[i] = rng.normal();
  for (const double lambda : {0.0, 0.3, 1.0, 4.0}) {
    const Gaussian a = linear_gaussian_posterior(prior, design, y, 1.0, lambda);
    const Gaussian b = linear_gaussian_posterior(prior, design, y, 1.0, lambda + 1e-9);
    CHECK((a.mean - b.mean).norm() <= 1e-6);
    CHECK((a.cov - b.cov).norm() <= 1e-6);
  }
}

TEST_CASE("quadratic form moments: constant and chi-square cases") {
  const Gaussian g = Gaussian::isotropic(2, 0.0, 1.0);
  QuadraticForm constant = QuadraticForm::zero(2);
  constant.c = 4.5;
  const auto mc = quadratic_form_moments(g, constant);
  CHECK(mc.mean == doctest::Approx(4.5));
  CHECK(mc.variance == doctest::Approx(0.0));

  const Gaussian g1 = Gaussian::isotropic(1, 0.0, 1.0);
  QuadraticForm sq = QuadraticForm::zero(1);
  sq.A(0, 0) = 1.0;
  const auto ms = quadratic_form_moments(g1, sq);
  CHECK(ms.mean == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ms.variance == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("quadratic form moments match Monte Carlo on a random 4-D instance") {
  RandomStream rng(55, 0);
  const Gaussian g = random_spd_gaussian(4, rng);
  const QuadraticForm q = random_quadratic(4, rng);
  const auto m = quadratic_form_moments(g, q);

  RandomStream mc_rng(55, 1);
  const int n = 1000000;
  const Eigen::MatrixXd draws = sample(g, mc_rng, n);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = q(draws.row(i).transpose());
    s += v;
    s2 += v * v;
  }
  const double mc_mean = s / n;
  const double mc_var = s2 / n - mc_mean * mc_mean;
  const double se_mean = std::sqrt(mc_var / n);
  CHECK(std::abs(m.mean - mc_mean) <= 3.0 * se_mean);
  // Variance of the sample variance ~ (m4 - var^2)/n; a generous 4th-moment
  // proxy for a quadratic of a Gaussian keeps the bound honest.
  const double se_var_proxy = mc_var * std::sqrt(15.0 / n);
  CHECK(std::abs(m.variance - mc_var) <= 3.0 * se_var_proxy);
  CHECK(m.variance >= 0.0);
}

TEST_CASE("quadratic covariance: constants, self-consistency, symmetry") {
  RandomStream rng(66, 0);
  const Gaussian g = random_spd_gaussian(3, rng);
  const QuadraticForm q1 = random_quadratic(3, rng);
  QuadraticForm constant = QuadraticForm::zero(3);
  constant.c = -2.0;
  CHECK(quadratic_form_covariance(g, q1, constant) == doctest::Approx(0.0));
  CHECK(quadratic_form_covariance(g, q1, q1) ==
        doctest::Approx(quadratic_form_moments(g, q1).variance).epsilon(1e-12));
  const QuadraticForm q2 = random_quadratic(3, rng);
  CHECK(quadratic_form_covariance(g, q1, q2) ==
        doctest::Approx(quadratic_form_covariance(g, q2, q1)).epsilon(1e-12));
}

TEST_CASE("quadratic covariance matches Monte Carlo on a random 3-D instance") {
  RandomStream rng(88, 0);
  const Gaussian g = random_spd_gaussian(3, rng);
  const QuadraticForm q1 = random_quadratic(3, rng);
  const QuadraticForm q2 = random_quadratic(3, rng);
  const double closed = quadratic_form_covariance(g, q1, q2);

  RandomStream mc_rng(88, 1);
  const int n = 1000000;
  const Eigen::MatrixXd draws = sample(g, mc_rng, n);
  std::vector<double> prod(n);
  double s1 = 0.0, s2 = 0.0;
  std::vector<double> v1(n), v2(n);
  for (int i = 0; i < n; ++i) {
    v1[i] = q1(draws.row(i).transpose());
    v2[i] = q2(draws.row(i).transpose());
    s1 += v1[i];
    s2 += v2[i];
  }
  const double m1 = s1 / n, m2 = s2 / n;
  double cov = 0.0, var_of_prod = 0.0;
  for (int i = 0; i < n; ++i) {
    const double centered = (v1[i] - m1) * (v2[i] - m2);
    cov += centered;
    var_of_prod += centered * centered;
  }
  cov /= n;
  var_of_prod = var_of_prod / n - cov * cov;
  const double se = std::sqrt(var_of_prod / n);
  CHECK(std::abs(closed - cov) <= 3.0 * se);
}

TEST_CASE("non-SPD covariance is a hard error after one jitter") {
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;  // indefinite
  CHECK_THROWS(Gaussian::from_moments(Eigen::Vector2d::Zero(), bad));
}
