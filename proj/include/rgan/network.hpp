#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgan/autodiff.hpp"
#include "rgan/common.hpp"

namespace rgan {

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Flat parameter vector with named slices and Adam state.
struct ParamSet {
  Vec values;
  Vec grad;
  Vec m;
  Vec v;
  std::uint64_t step = 0;
  std::vector<ParamSlice> slices;

  std::size_t add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Mat get(std::size_t slice) const;
  void set(std::size_t slice, const Mat& value);
  const ParamSlice& find(const std::string& name) const;
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  void zero_grad() { grad.setZero(); }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(ParamSet& params, double lr, const AdamConfig& cfg = {});

double lr_schedule(std::size_t epoch, double base_lr = 5e-4, double decay = 0.2, std::size_t every = 100);

enum class Arch { ffnn, rnn, time_grid };

Arch arch_from_string(const std::string& s);
std::string to_string(Arch a);

struct NetSpec {
  Arch arch = Arch::ffnn;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  /// Hidden widths. For rnn the first entry is the recurrent layer.
  std::vector<std::size_t> hidden{64};
  /// Number of time steps (time_grid keeps one parameter block per step).
  std::size_t n_steps = 1;
};

/// Dense tanh network; identity output layer.
class Network {
 public:
  Network() = default;
  Network(NetSpec spec, std::uint64_t seed);

  const NetSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Output layer(s) set to emit `bias` for every input.
  void set_constant_output(const Vec& bias);
  void zero_output();

  // Tape evaluation. bind() records every slice on the tape, as variables when
  // trainable and as constants otherwise; collect_grads() adds the slice
  // gradients into params().grad.
  void bind(ad::Tape& tape, bool trainable);
  ad::Var forward(std::size_t step, const ad::Var& input, ad::Var* hidden) const;
  void collect_grads(const ad::Tape& tape);
  /// Initial recurrent state for a batch (rnn only).
  ad::Var initial_hidden(ad::Tape& tape, Eigen::Index batch) const;

  // Tape-free evaluation with identical arithmetic.
  Mat infer(std::size_t step, const Mat& input, Mat* hidden) const;
  Mat initial_hidden(Eigen::Index batch) const;

  std::size_t n_params() const { return params_.size(); }

 private:
  struct Layer {
    std::size_t w;
    std::size_t b;
    std::size_t u = static_cast<std::size_t>(-1);  // recurrent weights
  };
  void build();
  const std::vector<Layer>& layers_for(std::size_t step) const;

  NetSpec spec_;
  ParamSet params_;
  std::vector<std::vector<Layer>> blocks_;
  std::vector<ad::Var> bound_;
  bool bound_trainable_ = false;
};

}  // namespace rgan
