#include "aispo/policies.hpp"

#include <string>

namespace aispo {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMat = Eigen::Map<const RowMajor>;
using Mat = Eigen::Map<RowMajor>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;
using Vec = Eigen::Map<Eigen::VectorXd>;

}  // namespace

// ---------------------------------------------------------------- tabular

TabularSoftmaxPolicy::TabularSoftmaxPolicy(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions) {
  if (n_states < 1 || n_actions < 1) {
    throw ValidationError("tabular policy needs positive n_states and n_actions");
  }
  theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_states) * n_actions);
}

TabularSoftmaxPolicy TabularSoftmaxPolicy::from_logits(const Eigen::MatrixXd& logits) {
  TabularSoftmaxPolicy p(static_cast<int>(logits.rows()), static_cast<int>(logits.cols()));
  Eigen::VectorXd theta(p.n_params());
  for (int s = 0; s < p.n_states_; ++s) {
    for (int a = 0; a < p.n_actions_; ++a) theta[p.flat(s, a)] = logits(s, a);
  }
  p.set_parameters(theta);
  return p;
}

TabularSoftmaxPolicy TabularSoftmaxPolicy::from_probabilities(const PolicyTable& probabilities) {
  for (Eigen::Index s = 0; s < probabilities.rows(); ++s) {
    const auto row = probabilities.row(s);
    if (!row.allFinite() || (row.array() < 0.0).any() || std::abs(row.sum() - 1.0) > 1e-12) {
      throw ValidationError("policy row " + std::to_string(s) + " is not a distribution");
    }
  }
  return from_logits(probabilities.array().log().matrix());
}

TabularSoftmaxPolicy TabularSoftmaxPolicy::state_independent(int n_states,
                                                             const Eigen::VectorXd& probabilities) {
  PolicyTable table(n_states, probabilities.size());
  for (int s = 0; s < n_states; ++s) table.row(s) = probabilities.transpose();
  return from_probabilities(table);
}

void TabularSoftmaxPolicy::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != theta_.size()) {
    throw ValidationError("tabular policy expects " + std::to_string(theta_.size()) +
                          " parameters, got " + std::to_string(theta.size()));
  }
  for (int s = 0; s < n_states_; ++s) {
    bool any_finite = false;
    for (int a = 0; a < n_actions_; ++a) {
      const double x = theta[flat(s, a)];
      if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
        throw ValidationError("logit (" + std::to_string(s) + ", " + std::to_string(a) +
                              ") is NaN or +inf");
      }
      any_finite = any_finite || std::isfinite(x);
    }
    if (!any_finite) throw ValidationError("logit row " + std::to_string(s) + " has no support");
  }
  theta_ = theta;
}

void TabularSoftmaxPolicy::check_index(int s, int a) const {
  if (s < 0 || s >= n_states_) throw ValidationError("state index " + std::to_string(s) + " out of range");
  if (a < 0 || a >= n_actions_) throw ValidationError("action index " + std::to_string(a) + " out of range");
}

double TabularSoftmaxPolicy::row_log_normalizer(int s) const {
  const double* row = theta_.data() + flat(s, 0);
  double m = kNegInf;
  for (int b = 0; b < n_actions_; ++b) m = std::max(m, row[b]);
  double sum = 0.0;
  for (int b = 0; b < n_actions_; ++b) sum += std::exp(row[b] - m);
  return m + std::log(sum);
}

double TabularSoftmaxPolicy::log_prob(int s, int a) const {
  check_index(s, a);
  const double x = theta_[flat(s, a)];
  if (x == kNegInf) return kNegInf;
  return x - row_log_normalizer(s);
}

Eigen::VectorXd TabularSoftmaxPolicy::grad_log_prob(int s, int a) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n_params());
  add_grad_log_prob(s, a, 1.0, g);
  return g;
}

void TabularSoftmaxPolicy::add_grad_log_prob(int s, int a, double scale, Eigen::VectorXd& out) const {
  check_index(s, a);
  if (out.size() != n_params()) throw ValidationError("gradient buffer has the wrong size");
  const double lse = row_log_normalizer(s);
  for (int b = 0; b < n_actions_; ++b) {
    const double p = std::exp(theta_[flat(s, b)] - lse);
    out[flat(s, b)] += scale * ((b == a ? 1.0 : 0.0) - p);
  }
}

PolicyTable TabularSoftmaxPolicy::probabilities() const {
  PolicyTable table(n_states_, n_actions_);
  for (int s = 0; s < n_states_; ++s) {
    const double lse = row_log_normalizer(s);
    for (int a = 0; a < n_actions_; ++a) table(s, a) = std::exp(theta_[flat(s, a)] - lse);
  }
  return table;
}

int TabularSoftmaxPolicy::sample(int s, CounterRng& rng) const {
  check_index(s, 0);
  const double lse = row_log_normalizer(s);
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_supported = 0;
  for (int a = 0; a < n_actions_; ++a) {
    const double p = std::exp(theta_[flat(s, a)] - lse);
    if (p > 0.0) last_supported = a;
    cumulative += p;
    if (u < cumulative) return a;
  }
  // Round-off left cumulative slightly below 1.
  return last_supported;
}

// ---------------------------------------------------------------- MLP

Mlp::Mlp(int input_dim, int output_dim) : input_dim_(input_dim), output_dim_(output_dim) {
  if (input_dim < 1 || output_dim < 1) throw ValidationError("Mlp dimensions must be positive");
}

Eigen::Index Mlp::n_params() const {
  const Eigen::Index h = kHidden;
  return h * input_dim_ + h + h * h + h + output_dim_ * h + output_dim_;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, const double* params) const {
  const int h = kHidden;
  const double* p = params;
  ConstMat w1(p, h, input_dim_);
  p += h * input_dim_;
  ConstVec b1(p, h);
  p += h;
  ConstMat w2(p, h, h);
  p += h * h;
  ConstVec b2(p, h);
  p += h;
  ConstMat w3(p, output_dim_, h);
  p += output_dim_ * h;
  ConstVec b3(p, output_dim_);

  const Eigen::VectorXd h1 = (w1 * x + b1).array().tanh().matrix();
  const Eigen::VectorXd h2 = (w2 * h1 + b2).array().tanh().matrix();
  return w3 * h2 + b3;
}

void Mlp::backward(const Eigen::VectorXd& x, const double* params, const Eigen::VectorXd& dout,
                   double* grad) const {
  const int h = kHidden;
  const double* p = params;
  double* g = grad;
  ConstMat w1(p, h, input_dim_);
  Mat gw1(g, h, input_dim_);
  p += h * input_dim_;
  g += h * input_dim_;
  ConstVec b1(p, h);
  Vec gb1(g, h);
  p += h;
  g += h;
  ConstMat w2(p, h, h);
  Mat gw2(g, h, h);
  p += h * h;
  g += h * h;
  ConstVec b2(p, h);
  Vec gb2(g, h);
  p += h;
  g += h;
  ConstMat w3(p, output_dim_, h);
  Mat gw3(g, output_dim_, h);
  p += output_dim_ * h;
  g += output_dim_ * h;
  Vec gb3(g, output_dim_);

  const Eigen::VectorXd h1 = (w1 * x + b1).array().tanh().matrix();
  const Eigen::VectorXd h2 = (w2 * h1 + b2).array().tanh().matrix();

  gw3.noalias() += dout * h2.transpose();
  gb3 += dout;
  const Eigen::VectorXd dz2 = ((w3.transpose() * dout).array() * (1.0 - h2.array().square())).matrix();
  gw2.noalias() += dz2 * h1.transpose();
  gb2 += dz2;
  const Eigen::VectorXd dz1 = ((w2.transpose() * dz2).array() * (1.0 - h1.array().square())).matrix();
  gw1.noalias() += dz1 * x.transpose();
  gb1 += dz1;
}

void Mlp::initialize(double* params, CounterRng& rng, double last_scale) const {
  const int h = kHidden;
  double* p = params;
  auto fill = [&](int rows, int cols, double scale) {
    const double s = scale / std::sqrt(static_cast<double>(cols));
    for (int i = 0; i < rows * cols; ++i) *p++ = s * rng.normal();
    for (int i = 0; i < rows; ++i) *p++ = 0.0;
  };
  fill(h, input_dim_, 1.0);
  fill(h, h, 1.0);
  fill(output_dim_, h, last_scale);
}

// ---------------------------------------------------------------- Gaussian

GaussianMlpPolicy::GaussianMlpPolicy(int state_dim, int action_dim, std::uint64_t seed)
    : net_(state_dim, action_dim) {
  theta_ = Eigen::VectorXd::Zero(net_.n_params() + action_dim);
  CounterRng rng(seed, Stream::kInit, 0);
  net_.initialize(theta_.data(), rng, 0.01);
}

void GaussianMlpPolicy::set_parameters(const Eigen::VectorXd& theta) {
  if (theta.size() != theta_.size()) {
    throw ValidationError("Gaussian policy expects " + std::to_string(theta_.size()) +
                          " parameters, got " + std::to_string(theta.size()));
  }
  if (!theta.allFinite()) throw ValidationError("Gaussian policy parameters must be finite");
  theta_ = theta;
}

void GaussianMlpPolicy::check_shapes(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  if (s.size() != state_dim()) throw ValidationError("state has the wrong dimension");
  if (a.size() != action_dim()) throw ValidationError("action has the wrong dimension");
  if (!s.allFinite() || !a.allFinite()) throw ValidationError("state and action must be finite");
}

Eigen::VectorXd GaussianMlpPolicy::mean(const Eigen::VectorXd& s) const {
  if (s.size() != state_dim()) throw ValidationError("state has the wrong dimension");
  return net_.forward(s, theta_.data());
}

double GaussianMlpPolicy::log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
  check_shapes(s, a);
  const Eigen::VectorXd mu = net_.forward(s, theta_.data());
  double total = 0.0;
  for (int d = 0; d < action_dim(); ++d) {
    const double log_sigma = theta_[net_.n_params() + d];
    const double z = (a[d] - mu[d]) * std::exp(-log_sigma);
    total += -0.5 * z * z - log_sigma - kHalfLog2Pi;
  }
  return total;
}

Eigen::VectorXd GaussianMlpPolicy::grad_log_prob(const Eigen::VectorXd& s,
                                                 const Eigen::VectorXd& a) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n_params());
  add_grad_log_prob(s, a, 1.0, g);
  return g;
}

void GaussianMlpPolicy::add_grad_log_prob(const Eigen::VectorXd& s, const Eigen::VectorXd& a,
                                          double scale, Eigen::VectorXd& out) const {
  check_shapes(s, a);
  if (out.size() != n_params()) throw ValidationError("gradient buffer has the wrong size");
  const Eigen::VectorXd mu = net_.forward(s, theta_.data());
  Eigen::VectorXd dmu(action_dim());
  for (int d = 0; d < action_dim(); ++d) {
    const double log_sigma = theta_[net_.n_params() + d];
    const double inv_var = std::exp(-2.0 * log_sigma);
    const double diff = a[d] - mu[d];
    dmu[d] = scale * diff * inv_var;
    out[net_.n_params() + d] += scale * (diff * diff * inv_var - 1.0);
  }
  net_.backward(s, theta_.data(), dmu, out.data());
}

Eigen::VectorXd GaussianMlpPolicy::sample(const Eigen::VectorXd& s, CounterRng& rng) const {
  Eigen::VectorXd a = mean(s);
  for (int d = 0; d < action_dim(); ++d) {
    a[d] += std::exp(theta_[net_.n_params() + d]) * rng.normal();
  }
  return a;
}

}  // namespace aispo
