#include "cpe/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cpe {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Strong 64-bit mixer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_id)
    : master_seed_(master_seed),
      stream_id_(stream_id),
      key_(mix64(master_seed + kGolden * mix64(stream_id + kGolden))),
      counter_(0),
      has_spare_(false),
      spare_(0.0) {}

std::uint64_t RandomStream::next_u64() {
  counter_ += 1;
  return mix64(key_ + counter_ * kGolden);
}

double RandomStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double a, double b) { return a + (b - a) * uniform01(); }

double RandomStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 strictly positive so log(u1) is finite.
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

QuadratureRule gauss_legendre(int order) {
  if (order < 2 || order > 4096) {
    throw std::invalid_argument("gauss_legendre: order must be in [2, 4096]");
  }
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);

  const int n = order;
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-type initial guess for the i-th root of P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence: p1 = P_n(x), p2 = P_{n-1}(x).
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * x * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (x * p1 - p2) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

double log_sum_exp(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  const double m = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a stray +inf/NaN propagates
  double s = 0.0;
  for (const double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double jackknife_stderr(const std::vector<double>& values,
                        const std::function<double(const std::vector<double>&)>& statistic) {
  const std::size_t n = values.size();
  if (n < 10) throw std::invalid_argument("jackknife_stderr: need at least 10 values");
  std::vector<double> loo(n - 1);
  std::vector<double> stats(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(i), loo.begin());
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(i) + 1, values.end(),
              loo.begin() + static_cast<std::ptrdiff_t>(i));
    stats[i] = statistic(loo);
  }
  const double sbar = mean_of(stats);
  double ss = 0.0;
  for (const double s : stats) ss += (s - sbar) * (s - sbar);
  return std::sqrt(ss * (static_cast<double>(n) - 1.0) / static_cast<double>(n));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("mean_of: empty input");
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("variance_of: need at least 2 values");
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return ss / (static_cast<double>(v.size()) - 1.0);
}

double stderr_of_mean(const std::vector<double>& v) {
  return std::sqrt(variance_of(v) / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median_of: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double bootstrap_median_stderr(const std::vector<double>& values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const int reps = 2000;
  RandomStream rng(0xB007u, 0);
  std::vector<double> resample(n);
  std::vector<double> medians(reps);
  for (int r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      resample[i] = values[static_cast<std::size_t>(rng.uniform01() * n) % n];
    }
    medians[static_cast<std::size_t>(r)] = median_of(resample);
  }
  return std::sqrt(variance_of(medians));
}

}  // namespace cpe
