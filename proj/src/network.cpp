#include "rgan/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "rgan/random.hpp"

namespace rgan {

std::size_t ParamSet::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  ParamSlice s{name, size(), rows, cols};
  slices.push_back(s);
  const auto n = static_cast<Eigen::Index>(size() + s.size());
  values.conservativeResize(n);
  values.tail(static_cast<Eigen::Index>(s.size())).setZero();
  grad = Vec::Zero(n);
  m = Vec::Zero(n);
  v = Vec::Zero(n);
  return slices.size() - 1;
}

Mat ParamSet::get(std::size_t k) const {
  const ParamSlice& s = slices.at(k);
  Mat out(s.rows, s.cols);
  for (Eigen::Index i = 0; i < s.rows; ++i)
    for (Eigen::Index j = 0; j < s.cols; ++j) out(i, j) = values(static_cast<Eigen::Index>(s.offset) + i * s.cols + j);
  return out;
}

void ParamSet::set(std::size_t k, const Mat& value) {
  const ParamSlice& s = slices.at(k);
  if (value.rows() != s.rows || value.cols() != s.cols) throw std::invalid_argument("ParamSet::set: shape of " + s.name);
  for (Eigen::Index i = 0; i < s.rows; ++i)
    for (Eigen::Index j = 0; j < s.cols; ++j) values(static_cast<Eigen::Index>(s.offset) + i * s.cols + j) = value(i, j);
}

const ParamSlice& ParamSet::find(const std::string& name) const {
  for (const auto& s : slices)
    if (s.name == name) return s;
  throw std::out_of_range("ParamSet: no slice named " + name);
}

void adam_step(ParamSet& p, double lr, const AdamConfig& cfg) {
  if (p.grad.size() != p.values.size()) throw std::invalid_argument("adam_step: gradient shape mismatch");
  ++p.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.step));
  p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * p.grad;
  p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
  const Vec mhat = p.m / c1;
  const Vec vhat = p.v / c2;
  p.values.array() -= lr * mhat.array() / (vhat.array().sqrt() + cfg.eps);
}

double lr_schedule(std::size_t epoch, double base_lr, double decay, std::size_t every) {
  if (every == 0) throw std::invalid_argument("lr_schedule: every must be positive");
  return base_lr * std::pow(decay, static_cast<double>(epoch / every));
}

Arch arch_from_string(const std::string& s) {
  if (s == "ffnn") return Arch::ffnn;
  if (s == "rnn") return Arch::rnn;
  if (s == "time_grid") return Arch::time_grid;
  throw std::invalid_argument("unknown architecture: " + s);
}

std::string to_string(Arch a) {
  switch (a) {
    case Arch::ffnn: return "ffnn";
    case Arch::rnn: return "rnn";
    case Arch::time_grid: return "time_grid";
  }
  return "?";
}

Network::Network(NetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  if (spec_.input_dim == 0 || spec_.output_dim == 0) throw std::invalid_argument("Network: zero input or output size");
  if (spec_.arch == Arch::rnn && spec_.hidden.empty()) throw std::invalid_argument("Network: rnn needs a hidden layer");
  if (spec_.arch == Arch::time_grid && spec_.n_steps == 0) throw std::invalid_argument("Network: time_grid needs steps");
  build();
  auto eng = stream_engine(seed, 0, 0x6e6574);
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); a bias uses its layer's fan-in.
  auto fill = [&](std::size_t k, double fan_in) {
    if (k == static_cast<std::size_t>(-1)) return;
    std::uniform_real_distribution<double> unif(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    const ParamSlice& s = params_.slices[k];
    for (std::size_t i = 0; i < s.size(); ++i) params_.values(static_cast<Eigen::Index>(s.offset + i)) = unif(eng);
  };
  for (const auto& blk : blocks_)
    for (const auto& L : blk) {
      const auto fan_in = static_cast<double>(params_.slices[L.w].rows);
      fill(L.w, fan_in);
      if (L.u != static_cast<std::size_t>(-1)) fill(L.u, static_cast<double>(params_.slices[L.u].rows));
      fill(L.b, fan_in);
    }
}

void Network::build() {
  const std::size_t n_blocks = spec_.arch == Arch::time_grid ? spec_.n_steps : 1;
  blocks_.assign(n_blocks, {});
  for (std::size_t k = 0; k < n_blocks; ++k) {
    const std::string pre = n_blocks > 1 ? "t" + std::to_string(k) + "." : "";
    auto in = static_cast<Eigen::Index>(spec_.input_dim);
    for (std::size_t l = 0; l <= spec_.hidden.size(); ++l) {
      const bool last = l == spec_.hidden.size();
      const auto out = static_cast<Eigen::Index>(last ? spec_.output_dim : spec_.hidden[l]);
      const std::string nm = pre + (last ? "out" : "h" + std::to_string(l));
      Layer L;
      L.w = params_.add(nm + ".W", in, out);
      if (spec_.arch == Arch::rnn && l == 0) L.u = params_.add(nm + ".U", out, out);
      L.b = params_.add(nm + ".b", 1, out);
      blocks_[k].push_back(L);
      in = out;
    }
  }
}

const std::vector<Network::Layer>& Network::layers_for(std::size_t step) const {
  if (spec_.arch != Arch::time_grid) return blocks_.front();
  if (step >= blocks_.size()) throw std::out_of_range("Network: step beyond time grid");
  return blocks_[step];
}

void Network::set_constant_output(const Vec& bias) {
  if (static_cast<std::size_t>(bias.size()) != spec_.output_dim) throw std::invalid_argument("set_constant_output: size");
  for (const auto& blk : blocks_) {
    const Layer& L = blk.back();
    params_.set(L.w, Mat::Zero(params_.slices[L.w].rows, params_.slices[L.w].cols));
    params_.set(L.b, bias.transpose());
  }
}

void Network::zero_output() { set_constant_output(Vec::Zero(static_cast<Eigen::Index>(spec_.output_dim))); }

void Network::bind(ad::Tape& tape, bool trainable) {
  bound_.clear();
  bound_trainable_ = trainable;
  for (std::size_t k = 0; k < params_.slices.size(); ++k)
    bound_.push_back(trainable ? tape.variable(params_.get(k)) : tape.constant(params_.get(k)));
}

ad::Var Network::initial_hidden(ad::Tape& tape, Eigen::Index batch) const { return tape.constant(initial_hidden(batch)); }

Mat Network::initial_hidden(Eigen::Index batch) const {
  if (spec_.arch != Arch::rnn) return Mat();
  return Mat::Zero(batch, static_cast<Eigen::Index>(spec_.hidden.front()));
}

ad::Var Network::forward(std::size_t step, const ad::Var& input, ad::Var* hidden) const {
  if (bound_.size() != params_.slices.size()) throw std::logic_error("Network::forward: call bind() first");
  if (static_cast<std::size_t>(input.cols()) != spec_.input_dim) throw std::invalid_argument("Network::forward: input width");
  const auto& layers = layers_for(step);
  ad::Var x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    ad::Var z = ad::affine(x, bound_[L.w], bound_[L.b]);
    if (L.u != static_cast<std::size_t>(-1)) {
      if (hidden == nullptr || !hidden->valid()) throw std::invalid_argument("Network::forward: rnn needs hidden state");
      z = z + ad::matmul(*hidden, bound_[L.u]);
    }
    if (l + 1 < layers.size()) {
      x = ad::tanh(z);
      if (L.u != static_cast<std::size_t>(-1)) *hidden = x;
    } else {
      x = z;
    }
  }
  return x;
}

void Network::collect_grads(const ad::Tape& tape) {
  if (!bound_trainable_) return;
  for (std::size_t k = 0; k < bound_.size(); ++k) {
    const Mat g = tape.gradient(bound_[k]);
    const ParamSlice& s = params_.slices[k];
    for (Eigen::Index i = 0; i < s.rows; ++i)
      for (Eigen::Index j = 0; j < s.cols; ++j) params_.grad(static_cast<Eigen::Index>(s.offset) + i * s.cols + j) += g(i, j);
  }
}

Mat Network::infer(std::size_t step, const Mat& input, Mat* hidden) const {
  if (static_cast<std::size_t>(input.cols()) != spec_.input_dim) throw std::invalid_argument("Network::infer: input width");
  const auto& layers = layers_for(step);
  Mat x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& L = layers[l];
    Mat z = x * params_.get(L.w);
    z.rowwise() += params_.get(L.b).row(0);
    if (L.u != static_cast<std::size_t>(-1)) {
      if (hidden == nullptr || hidden->rows() != x.rows()) throw std::invalid_argument("Network::infer: rnn needs hidden state");
      z += *hidden * params_.get(L.u);
    }
    if (l + 1 < layers.size()) {
      x = ad::tanh_values(z);
      if (L.u != static_cast<std::size_t>(-1)) *hidden = x;
    } else {
      x = std::move(z);
    }
  }
  return x;
}

}  // namespace rgan
