#include "convsim/tinynet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "convsim/errors.hpp"

namespace convsim {

namespace {

void check_input(const MlpParams& params, std::size_t n) {
  if (params.layers.empty()) throw std::invalid_argument("empty network");
  if (static_cast<int>(n) != params.input_size())
    throw std::invalid_argument("input size " + std::to_string(n) +
                                " does not match network input " +
                                std::to_string(params.input_size()));
}

}  // namespace

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(input_size());
  for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weight.rows()));
  return sizes;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

MlpParams MlpParams::zeros(std::span<const int> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("need at least 2 sizes");
  MlpParams p;
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i - 1] < 1 || sizes[i] < 1)
      throw std::invalid_argument("layer sizes must be >= 1");
    p.layers.push_back({Eigen::MatrixXd::Zero(sizes[i], sizes[i - 1]),
                        Eigen::VectorXd::Zero(sizes[i])});
  }
  return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
  auto sizes = other.layer_sizes();
  return zeros(sizes);
}

bool MlpParams::same_shape(const MlpParams& other) const {
  return layer_sizes() == other.layer_sizes();
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

double& MlpParams::flat(std::size_t i) {
  for (auto& l : layers) {
    if (i < static_cast<std::size_t>(l.weight.size())) return l.weight.data()[i];
    i -= l.weight.size();
    if (i < static_cast<std::size_t>(l.bias.size())) return l.bias[i];
    i -= l.bias.size();
  }
  throw std::out_of_range("flat parameter index");
}

double MlpParams::flat(std::size_t i) const {
  return const_cast<MlpParams*>(this)->flat(i);
}

MlpParams& MlpParams::operator+=(const MlpParams& other) {
  if (!same_shape(other)) throw std::invalid_argument("shape mismatch");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight += other.layers[i].weight;
    layers[i].bias += other.layers[i].bias;
  }
  return *this;
}

MlpParams& MlpParams::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

MlpParams init_params(int input, int output, RandomStream& rng,
                      std::span<const int> hidden) {
  if (input < 1 || output < 1)
    throw std::invalid_argument("network input and output must be >= 1");
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  auto p = MlpParams::zeros(sizes);
  for (auto& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
    for (Eigen::Index i = 0; i < l.weight.size(); ++i)
      l.weight.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return p;
}

namespace {

// tanh(x) = 1 - 2 / (exp(2x) + 1), using Eigen's vectorized exp. Saturates
// to +-1 without overflow.
template <typename Derived>
void apply_tanh(Eigen::MatrixBase<Derived>& z) {
  auto a = z.array();
  a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
}

}  // namespace

ForwardTrace forward_batch(const MlpParams& params,
                           const Eigen::MatrixXd& inputs) {
  check_input(params, inputs.rows());
  ForwardTrace trace;
  trace.activations.reserve(params.layers.size() + 1);
  trace.activations.push_back(inputs);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Eigen::MatrixXd z(l.weight.rows(), inputs.cols());
    z.noalias() = l.weight * trace.activations.back();
    z.colwise() += l.bias;
    if (i + 1 < params.layers.size()) apply_tanh(z);
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

Eigen::VectorXd forward(const MlpParams& params, std::span<const double> input) {
  check_input(params, input.size());
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(
      input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Eigen::VectorXd z = l.bias;
    z.noalias() += l.weight * a;
    if (i + 1 < params.layers.size()) apply_tanh(z);
    a = std::move(z);
  }
  return a;
}

MlpParams backward_batch(const MlpParams& params, const ForwardTrace& trace,
                         const Eigen::MatrixXd& upstream) {
  const auto n_layers = params.layers.size();
  if (trace.activations.size() != n_layers + 1)
    throw std::invalid_argument("trace does not match network depth");
  if (upstream.rows() != params.output_size() ||
      upstream.cols() != trace.output().cols())
    throw std::invalid_argument("upstream gradient shape mismatch");
  auto grads = MlpParams::zeros_like(params);
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& prev = trace.activations[k];
    grads.layers[k].weight.noalias() = delta * prev.transpose();
    grads.layers[k].bias = delta.rowwise().sum();
    if (k == 0) break;
    Eigen::MatrixXd back(prev.rows(), delta.cols());
    back.noalias() = params.layers[k].weight.transpose() * delta;
    delta = back.array() * (1.0 - prev.array().square());
  }
  return grads;
}

MlpParams backward(const MlpParams& params, std::span<const double> input,
                   std::span<const double> upstream) {
  check_input(params, input.size());
  if (static_cast<int>(upstream.size()) != params.output_size())
    throw std::invalid_argument("upstream gradient size mismatch");
  Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(
      input.data(), static_cast<Eigen::Index>(input.size()), 1);
  Eigen::MatrixXd g = Eigen::Map<const Eigen::MatrixXd>(
      upstream.data(), static_cast<Eigen::Index>(upstream.size()), 1);
  return backward_batch(params, forward_batch(params, x), g);
}

ActionDistribution ActionDistribution::from_logits(
    std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  ActionDistribution d;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  const double lse = mx + std::log(sum);
  d.probs_.reserve(logits.size());
  d.log_probs_.reserve(logits.size());
  for (double z : logits) {
    d.log_probs_.push_back(z - lse);
    d.probs_.push_back(std::exp(z - lse));
  }
  return d;
}

double ActionDistribution::entropy() const {
  double h = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i)
    if (probs_[i] > 0.0) h -= probs_[i] * log_probs_[i];
  return h;
}

int ActionDistribution::argmax() const {
  return static_cast<int>(std::max_element(probs_.begin(), probs_.end()) -
                          probs_.begin());
}

ActionDistribution forward_actor(const MlpParams& params,
                                 std::span<const double> obs) {
  Eigen::VectorXd logits = forward(params, obs);
  return ActionDistribution::from_logits(
      std::span<const double>(logits.data(), logits.size()));
}

double forward_critic(const MlpParams& params, std::span<const double> obs) {
  if (params.output_size() != 1)
    throw std::invalid_argument("critic must have a single output");
  return forward(params, obs)[0];
}

AdamState AdamState::for_params(const MlpParams& params) {
  AdamState s;
  s.m = MlpParams::zeros_like(params);
  s.v = MlpParams::zeros_like(params);
  return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state,
               double lr) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) ||
      !params.same_shape(state.v))
    throw std::invalid_argument("adam_step: shape mismatch");
  if (!grads.all_finite())
    throw TrainingError("non-finite gradient passed to Adam");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight,
           state.m.layers[i].weight, state.v.layers[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias,
           state.m.layers[i].bias, state.v.layers[i].bias);
  }
}

ActionSample sample_action(const ActionDistribution& dist, RandomStream& rng) {
  const auto& p = dist.probs();
  for (double x : p)
    if (!std::isfinite(x) || x < 0.0)
      throw TrainingError("degenerate action distribution");
  const double u = rng.uniform();
  double cum = 0.0;
  int last_nonzero = 0;
  for (int i = 0; i < dist.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_nonzero = i;
    cum += p[i];
    if (u < cum) return {i, dist.log_prob(i)};
  }
  // u fell past the rounded total
  return {last_nonzero, dist.log_prob(last_nonzero)};
}

void write_params(BinaryWriter& out, const MlpParams& params) {
  out.put<std::uint32_t>(static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.rows()));
    out.put<std::uint32_t>(static_cast<std::uint32_t>(l.weight.cols()));
    // row-major weights
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w =
        l.weight;
    out.put_doubles(w.data(), static_cast<std::size_t>(w.size()));
    out.put_doubles(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

MlpParams read_params(BinaryReader& in) {
  MlpParams p;
  const auto n = in.get<std::uint32_t>();
  if (n == 0 || n > 64) throw FormatError("implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    auto w = in.get_doubles();
    auto b = in.get_doubles();
    if (w.size() != std::size_t{rows} * cols || b.size() != rows)
      throw FormatError("layer shape does not match stored data");
    DenseLayer l;
    l.weight = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(w.data(), rows, cols);
    l.bias = Eigen::Map<Eigen::VectorXd>(b.data(), rows);
    if (!p.layers.empty() && p.layers.back().weight.rows() != cols)
      throw FormatError("inconsistent layer chain");
    p.layers.push_back(std::move(l));
  }
  return p;
}

void write_adam(BinaryWriter& out, const AdamState& state) {
  out.put<std::int64_t>(state.step);
  out.put<double>(state.beta1);
  out.put<double>(state.beta2);
  out.put<double>(state.epsilon);
  write_params(out, state.m);
  write_params(out, state.v);
}

AdamState read_adam(BinaryReader& in) {
  AdamState s;
  s.step = in.get<std::int64_t>();
  s.beta1 = in.get<double>();
  s.beta2 = in.get<double>();
  s.epsilon = in.get<double>();
  s.m = read_params(in);
  s.v = read_params(in);
  if (!s.m.same_shape(s.v)) throw FormatError("Adam moment shapes differ");
  return s;
}

}  // namespace convsim
