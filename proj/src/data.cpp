#include "cpe/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace cpe {

TransformSet TransformSet::identity_only() {
  TransformSet t;
  t.transforms.push_back({"identity", [](double x) { return x; }});
  t.weights = Eigen::VectorXd::Ones(1);
  return t;
}

TransformSet TransformSet::identity_mirror() {
  TransformSet t;
  t.transforms.push_back({"identity", [](double x) { return x; }});
  t.transforms.push_back({"mirror", [](double x) { return -x; }});
  t.weights = Eigen::VectorXd::Constant(2, 0.5);
  return t;
}

TransformSet TransformSet::from_names(const std::vector<std::string>& names,
                                      const std::vector<double>& weights) {
  if (names.empty()) throw std::invalid_argument("TransformSet: empty name list");
  if (!weights.empty() && weights.size() != names.size()) {
    throw std::invalid_argument("TransformSet: weights length != names length");
  }
  TransformSet t;
  for (const auto& name : names) {
    if (name == "identity") {
      t.transforms.push_back({"identity", [](double x) { return x; }});
    } else if (name == "mirror") {
      t.transforms.push_back({"mirror", [](double x) { return -x; }});
    } else {
      throw std::invalid_argument("TransformSet: unknown transform '" + name + "'");
    }
  }
  const int m = static_cast<int>(names.size());
  if (weights.empty()) {
    t.weights = Eigen::VectorXd::Constant(m, 1.0 / m);
  } else {
    t.weights.resize(m);
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      t.weights[i] = weights[static_cast<std::size_t>(i)];
      s += weights[static_cast<std::size_t>(i)];
    }
    if (std::abs(s - 1.0) > 1e-12) {
      throw std::invalid_argument("TransformSet: weights must sum to 1");
    }
  }
  return t;
}

Eigen::VectorXd fourier_features(double x, int order) {
  if (order < 1) throw std::invalid_argument("fourier_features: order must be >= 1");
  if (x < -1.0 || x > 1.0) {
    throw std::invalid_argument("fourier_features: x outside [-1, 1]");
  }
  Eigen::VectorXd phi(order);
  phi[0] = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  for (int k = 2; k <= order; ++k) {
    phi[k - 1] = (k % 2 == 1) ? inv_sqrt_pi * std::sin(k * x) : inv_sqrt_pi * std::cos(k * x);
  }
  return phi;
}

Dataset sample_dataset(const DataGenSpec& spec, int n, RandomStream& rng) {
  if (n < 0) throw std::invalid_argument("sample_dataset: n must be >= 0");
  Dataset d;
  d.xs.resize(n);
  d.ys.resize(n);
  const double noise_sd = std::sqrt(spec.noise_var_true);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    const double m = spec.true_coeffs.dot(fourier_features(x, spec.basis_order_true));
    d.xs[i] = x;
    d.ys[i] = m + noise_sd * rng.normal();
  }
  return d;
}

Conditional true_conditional(const DataGenSpec& spec, double x) {
  return {spec.true_coeffs.dot(fourier_features(x, spec.basis_order_true)),
          spec.noise_var_true};
}

DataGenSpec mirror_invariant_spec(int order, double noise_var) {
  if (order < 1) throw std::invalid_argument("mirror_invariant_spec: order must be >= 1");
  if (noise_var <= 0.0) throw std::invalid_argument("mirror_invariant_spec: noise_var <= 0");
  DataGenSpec spec;
  spec.basis_order_true = order;
  spec.noise_var_true = noise_var;
  spec.true_coeffs = Eigen::VectorXd::Zero(order);
  spec.true_coeffs[0] = 1.0;  // constant component
  for (int k = 2; k <= order; ++k) {
    if (k % 2 == 0) spec.true_coeffs[k - 1] = 1.0;  // cosines only
  }
  return spec;
}

namespace {

// Locale-independent, 17 significant digits (round-trippable doubles).
std::string fmt17(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  out << "x,y\n";
  for (int i = 0; i < data.size(); ++i) {
    out << fmt17(data.xs[i]) << ',' << fmt17(data.ys[i]) << '\n';
  }
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  write_dataset_csv(data, out);
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "x,y") {
    throw std::runtime_error("read_dataset_csv: missing 'x,y' header");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("read_dataset_csv: malformed row '" + line + "'");
    }
    xs.push_back(std::stod(line.substr(0, comma)));
    ys.push_back(std::stod(line.substr(comma + 1)));
  }
  Dataset d;
  d.xs = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  d.ys = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return d;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path);
  return read_dataset_csv(in);
}

}  // namespace cpe
