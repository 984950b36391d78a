#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpe/numerics.hpp"

namespace cpe {

enum class InputLaw { UniformMinus1To1 };

/// The data-generating distribution nu: x ~ Uniform(-1,1),
/// y | x ~ N(true_coeffs . phi_K(x), noise_var_true).
struct DataGenSpec {
  int basis_order_true = 0;
  Eigen::VectorXd true_coeffs;
  double noise_var_true = 1.0;
  InputLaw input_law = InputLaw::UniformMinus1To1;
};

struct Dataset {
  Eigen::VectorXd xs;
  Eigen::VectorXd ys;

  int size() const { return static_cast<int>(xs.size()); }
};

/// Finite set of label-preserving input maps [-1,1] -> [-1,1] with a
/// probability vector over them.
struct TransformSet {
  struct Transform {
    std::string name;
    std::function<double(double)> map;
  };

  std::vector<Transform> transforms;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(transforms.size()); }

  static TransformSet identity_only();
  static TransformSet identity_mirror();  // {x, -x}, uniform weights
  /// Build from names in {"identity", "mirror"}; empty weights = uniform.
  static TransformSet from_names(const std::vector<std::string>& names,
                                 const std::vector<double>& weights = {});
};

/// Fourier feature map: component 1 is 1/sqrt(2*pi); for k >= 2, odd k gives
/// sin(k x)/sqrt(pi) and even k gives cos(k x)/sqrt(pi). Rejects |x| > 1.
Eigen::VectorXd fourier_features(double x, int order);

Dataset sample_dataset(const DataGenSpec& spec, int n, RandomStream& rng);

struct Conditional {
  double mean = 0.0;
  double var = 0.0;
};

Conditional true_conditional(const DataGenSpec& spec, double x);

/// A nu whose conditional mean uses only the constant and cosine components,
/// so x -> -x is an exact invariance of the data-generating distribution.
DataGenSpec mirror_invariant_spec(int order, double noise_var);

/// CSV with header "x,y", one row per sample, 17 significant digits.
void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::string& path);

}  // namespace cpe
