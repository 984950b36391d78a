#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace cpe {

/// Counter-based random stream. Distinct (master_seed, stream_id) pairs give
/// statistically independent sequences, and a stream replays identically no
/// matter how work is scheduled across threads.
class RandomStream {
 public:
  RandomStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01();

  /// Uniform on [a, b).
  double uniform(double a, double b);

  /// Standard normal via Box-Muller (no rejection, fully deterministic).
  double normal();

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_;
  bool has_spare_;
  double spare_;
};

/// Gauss-Legendre rule on [-1, 1]: nodes ascending, weights positive,
/// weights summing to 2.
struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  int order = 0;
};

/// Nodes and weights by Newton iteration on the Legendre recurrence.
/// Valid orders: 2..4096.
QuadratureRule gauss_legendre(int order);

/// max-subtracted log(sum(exp(v))); never overflows for finite input.
double log_sum_exp(const std::vector<double>& values);

/// Leave-one-out standard error of `statistic` over `values` (length >= 10).
double jackknife_stderr(const std::vector<double>& values,
                        const std::function<double(const std::vector<double>&)>& statistic);

// Small sample-statistic helpers shared across modules.
double mean_of(const std::vector<double>& v);
double variance_of(const std::vector<double>& v);  // unbiased, n-1 denominator
double stderr_of_mean(const std::vector<double>& v);
double median_of(std::vector<double> v);  // by value: sorts a copy

/// Bootstrap standard error of the sample median (2000 resamples, fixed
/// internal stream: deterministic for a given input). Robust to the heavy
/// tails of per-seed gradient samples, unlike the normal-approximation
/// 1.2533 sd/sqrt(n) formula.
double bootstrap_median_stderr(const std::vector<double>& values);

class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cpe
