#include "rgan/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace rgan::ad {

const Mat& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Mat& v = value();
  if (v.size() != 1) throw std::logic_error("Var::scalar: value is not 1 x 1");
  return v(0, 0);
}

Var Tape::constant(Mat v) {
  nodes_.push_back(Node{std::move(v), Mat(), nullptr, false, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Mat v) {
  nodes_.push_back(Node{std::move(v), Mat(), nullptr, true, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Mat value, const std::vector<std::size_t>& parents, Backward back) {
  bool need = false;
  for (auto p : parents) need = need || nodes_[p].needs_grad;
  nodes_.push_back(Node{std::move(value), Mat(), need ? std::move(back) : nullptr, need, false});
  return Var(this, nodes_.size() - 1);
}

Mat& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Mat Tape::gradient(const Var& v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Mat::Zero(n.value.rows(), n.value.cols());
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw std::logic_error("Tape::backward: loss from another tape");
  if (loss.value().size() != 1) throw std::logic_error("Tape::backward: loss must be 1 x 1");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  grad(loss.id()).setOnes();
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.back) n.back(*this, i);
  }
}

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw std::logic_error("ad: operands on different tapes");
  return *a.tape();
}

Eigen::Index bdim(Eigen::Index x, Eigen::Index y, const char* what) {
  if (x == y || y == 1) return x;
  if (x == 1) return y;
  throw std::invalid_argument(std::string("ad: incompatible shapes in ") + what);
}

Mat expand(const Mat& m, Eigen::Index r, Eigen::Index c) {
  if (m.rows() == r && m.cols() == c) return m;
  return m.replicate(r / m.rows(), c / m.cols());
}

// Sums a broadcast gradient back to the operand shape.
Mat reduce(const Mat& g, Eigen::Index r, Eigen::Index c) {
  if (g.rows() == r && g.cols() == c) return g;
  if (r == 1 && c == 1) return Mat::Constant(1, 1, g.sum());
  if (r == 1) return g.colwise().sum();
  return g.rowwise().sum();
}

template <class F, class GA, class GB>
Var binary(const Var& a, const Var& b, const char* what, F f, GA ga, GB gb) {
  Tape& t = same_tape(a, b);
  const Eigen::Index R = bdim(a.rows(), b.rows(), what), C = bdim(a.cols(), b.cols(), what);
  const std::size_t ia = a.id(), ib = b.id();
  Mat out = (a.rows() == R && a.cols() == C && b.rows() == R && b.cols() == C)
                ? Mat(f(a.value(), b.value()))
                : Mat(f(expand(a.value(), R, C), expand(b.value(), R, C)));
  return t.push(std::move(out), {ia, ib}, [ia, ib, R, C, ga, gb](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const Mat& xa = tp.value(ia);
    const Mat& xb = tp.value(ib);
    const bool plain = xa.rows() == R && xa.cols() == C && xb.rows() == R && xb.cols() == C;
    if (plain) {
      if (tp.needs_grad(ia)) tp.grad(ia) += ga(g, xa, xb, tp.value(self));
      if (tp.needs_grad(ib)) tp.grad(ib) += gb(g, xa, xb, tp.value(self));
      return;
    }
    const Mat ea = expand(xa, R, C), eb = expand(xb, R, C);
    if (tp.needs_grad(ia)) tp.grad(ia) += reduce(ga(g, ea, eb, tp.value(self)), xa.rows(), xa.cols());
    if (tp.needs_grad(ib)) tp.grad(ib) += reduce(gb(g, ea, eb, tp.value(self)), xb.rows(), xb.cols());
  });
}

template <class F, class G>
Var unary(const Var& x, F f, G gfun) {
  Tape& t = *x.tape();
  const std::size_t ix = x.id();
  return t.push(f(x.value()), {ix}, [ix, gfun](Tape& tp, std::size_t self) {
    tp.grad(ix) += gfun(tp.grad(self), tp.value(ix), tp.value(self));
  });
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  return binary(
      a, b, "+", [](const Mat& x, const Mat& y) -> Mat { return x + y; },
      [](const Mat& g, const Mat&, const Mat&, const Mat&) -> Mat { return g; },
      [](const Mat& g, const Mat&, const Mat&, const Mat&) -> Mat { return g; });
}

Var operator-(const Var& a, const Var& b) {
  return binary(
      a, b, "-", [](const Mat& x, const Mat& y) -> Mat { return x - y; },
      [](const Mat& g, const Mat&, const Mat&, const Mat&) -> Mat { return g; },
      [](const Mat& g, const Mat&, const Mat&, const Mat&) -> Mat { return -g; });
}

Var operator*(const Var& a, const Var& b) {
  return binary(
      a, b, "*", [](const Mat& x, const Mat& y) -> Mat { return x.cwiseProduct(y); },
      [](const Mat& g, const Mat&, const Mat& y, const Mat&) -> Mat { return g.cwiseProduct(y); },
      [](const Mat& g, const Mat& x, const Mat&, const Mat&) -> Mat { return g.cwiseProduct(x); });
}

Var operator/(const Var& a, const Var& b) {
  return binary(
      a, b, "/", [](const Mat& x, const Mat& y) -> Mat { return x.cwiseQuotient(y); },
      [](const Mat& g, const Mat&, const Mat& y, const Mat&) -> Mat { return g.cwiseQuotient(y); },
      [](const Mat& g, const Mat&, const Mat& y, const Mat& out) -> Mat {
        return -(g.cwiseProduct(out)).cwiseQuotient(y);
      });
}

Var operator-(const Var& a) {
  return unary(a, [](const Mat& x) -> Mat { return -x; }, [](const Mat& g, const Mat&, const Mat&) -> Mat { return -g; });
}

Var operator+(const Var& a, double s) {
  return unary(a, [s](const Mat& x) -> Mat { return x.array() + s; },
               [](const Mat& g, const Mat&, const Mat&) -> Mat { return g; });
}
Var operator+(double s, const Var& a) { return a + s; }
Var operator-(const Var& a, double s) { return a + (-s); }
Var operator-(double s, const Var& a) {
  return unary(a, [s](const Mat& x) -> Mat { return (s - x.array()).matrix(); },
               [](const Mat& g, const Mat&, const Mat&) -> Mat { return -g; });
}
Var operator*(const Var& a, double s) {
  return unary(a, [s](const Mat& x) -> Mat { return x * s; },
               [s](const Mat& g, const Mat&, const Mat&) -> Mat { return g * s; });
}
Var operator*(double s, const Var& a) { return a * s; }
Var operator/(const Var& a, double s) { return a * (1.0 / s); }

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("ad::matmul: inner dimensions differ");
  const std::size_t ia = a.id(), ib = b.id();
  Mat out = a.value() * b.value();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(ia)) tp.grad(ia).noalias() += g * tp.value(ib).transpose();
    if (tp.needs_grad(ib)) tp.grad(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

Var affine(const Var& x, const Var& w, const Var& b) {
  Tape& t = same_tape(x, w);
  same_tape(x, b);
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols())
    throw std::invalid_argument("ad::affine: shape mismatch");
  const std::size_t ix = x.id(), iw = w.id(), ib = b.id();
  Mat out = x.value() * w.value();
  out.rowwise() += b.value().row(0);
  Tape::Backward back = [ix, iw, ib](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    if (tp.needs_grad(ix)) tp.grad(ix).noalias() += g * tp.value(iw).transpose();
    if (tp.needs_grad(iw)) tp.grad(iw).noalias() += tp.value(ix).transpose() * g;
    if (tp.needs_grad(ib)) tp.grad(ib) += g.colwise().sum();
  };
  return t.push(std::move(out), {ix, iw, ib}, std::move(back));
}

Mat tanh_values(const Mat& v) {
  // 1 - 2/(e^{2x}+1); clamped where tanh is 1 to double precision
  const auto e = (2.0 * v.array().max(-20.0).min(20.0)).exp();
  return 1.0 - 2.0 / (e + 1.0);
}

Var tanh(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return tanh_values(v); },
               [](const Mat& g, const Mat&, const Mat& y) -> Mat { return g.array() * (1.0 - y.array().square()); });
}

Var exp(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return v.array().exp(); },
               [](const Mat& g, const Mat&, const Mat& y) -> Mat { return g.cwiseProduct(y); });
}

Var log(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return v.array().log(); },
               [](const Mat& g, const Mat& v, const Mat&) -> Mat { return g.cwiseQuotient(v); });
}

Var pow(const Var& x, double p) {
  return unary(x, [p](const Mat& v) -> Mat { return v.array().pow(p); },
               [p](const Mat& g, const Mat& v, const Mat&) -> Mat { return g.array() * p * v.array().pow(p - 1.0); });
}

Var square(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return v.array().square(); },
               [](const Mat& g, const Mat& v, const Mat&) -> Mat { return 2.0 * g.cwiseProduct(v); });
}

Var abs(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return v.cwiseAbs(); },
               [](const Mat& g, const Mat& v, const Mat&) -> Mat {
                 return g.array() * ((v.array() > 0.0).cast<double>() - (v.array() < 0.0).cast<double>());
               });
}

Var clamp_min(const Var& x, double c) {
  return unary(x, [c](const Mat& v) -> Mat { return v.array().max(c); },
               [c](const Mat& g, const Mat& v, const Mat&) -> Mat { return g.array() * (v.array() > c).cast<double>(); });
}

Var sum_cols(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return v.rowwise().sum(); },
               [](const Mat& g, const Mat& v, const Mat&) -> Mat { return g.replicate(1, v.cols()); });
}

Var mean_rows(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return v.colwise().mean(); },
               [](const Mat& g, const Mat& v, const Mat&) -> Mat {
                 return g.replicate(v.rows(), 1) / static_cast<double>(v.rows());
               });
}

Var sum_all(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return Mat::Constant(1, 1, v.sum()); },
               [](const Mat& g, const Mat& v, const Mat&) -> Mat { return Mat::Constant(v.rows(), v.cols(), g(0, 0)); });
}

Var mean_all(const Var& x) {
  return unary(x, [](const Mat& v) -> Mat { return Mat::Constant(1, 1, v.mean()); },
               [](const Mat& g, const Mat& v, const Mat&) -> Mat {
                 return Mat::Constant(v.rows(), v.cols(), g(0, 0) / static_cast<double>(v.size()));
               });
}

Var col(const Var& x, Eigen::Index j) { return cols(x, j, 1); }

Var cols(const Var& x, Eigen::Index first, Eigen::Index count) {
  if (first < 0 || count < 0 || first + count > x.cols()) throw std::out_of_range("ad::cols: column range");
  return unary(x, [first, count](const Mat& v) -> Mat { return v.middleCols(first, count); },
               [first, count](const Mat& g, const Mat& v, const Mat&) -> Mat {
                 Mat out = Mat::Zero(v.rows(), v.cols());
                 out.middleCols(first, count) = g;
                 return out;
               });
}

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("ad::hcat: nothing to concatenate");
  Tape& t = *parts.front().tape();
  const Eigen::Index R = parts.front().rows();
  Eigen::Index C = 0;
  for (const auto& p : parts) {
    if (p.tape() != &t || p.rows() != R) throw std::invalid_argument("ad::hcat: row mismatch");
    C += p.cols();
  }
  Mat out(R, C);
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> offs;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    ids.push_back(p.id());
    offs.push_back(off);
    off += p.cols();
  }
  return t.push(std::move(out), ids, [ids, offs](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k)
      if (tp.needs_grad(ids[k])) tp.grad(ids[k]) += g.middleCols(offs[k], tp.value(ids[k]).cols());
  });
}

namespace {

Eigen::Index square_dim(Eigen::Index n, const char* what) {
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(n))));
  if (d * d != n) throw std::invalid_argument(std::string("ad::") + what + ": columns are not a square count");
  return d;
}

}  // namespace

Var batch_matvec(const Var& m, const Var& v) {
  Tape& t = same_tape(m, v);
  const Eigen::Index d = v.cols(), B = v.rows();
  if (m.rows() != B || m.cols() != d * d) throw std::invalid_argument("ad::batch_matvec: shape mismatch");
  const Mat& M = m.value();
  const Mat& x = v.value();
  Mat out = Mat::Zero(B, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out.col(i).array() += M.col(i * d + j).array() * x.col(j).array();
  const std::size_t im = m.id(), iv = v.id();
  return t.push(std::move(out), {im, iv}, [im, iv, d](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const Mat& M = tp.value(im);
    const Mat& x = tp.value(iv);
    if (tp.needs_grad(im)) {
      Mat& gm = tp.grad(im);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) gm.col(i * d + j).array() += g.col(i).array() * x.col(j).array();
    }
    if (tp.needs_grad(iv)) {
      Mat& gv = tp.grad(iv);
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) gv.col(j).array() += g.col(i).array() * M.col(i * d + j).array();
    }
  });
}

Var batch_outer(const Var& u, const Var& v) {
  Tape& t = same_tape(u, v);
  const Eigen::Index B = u.rows(), du = u.cols(), dv = v.cols();
  if (v.rows() != B) throw std::invalid_argument("ad::batch_outer: row mismatch");
  Mat out(B, du * dv);
  for (Eigen::Index i = 0; i < du; ++i)
    for (Eigen::Index j = 0; j < dv; ++j) out.col(i * dv + j) = u.value().col(i).cwiseProduct(v.value().col(j));
  const std::size_t iu = u.id(), iv = v.id();
  return t.push(std::move(out), {iu, iv}, [iu, iv, du, dv](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const Mat& a = tp.value(iu);
    const Mat& b = tp.value(iv);
    if (tp.needs_grad(iu)) {
      Mat& ga = tp.grad(iu);
      for (Eigen::Index i = 0; i < du; ++i)
        for (Eigen::Index j = 0; j < dv; ++j) ga.col(i).array() += g.col(i * dv + j).array() * b.col(j).array();
    }
    if (tp.needs_grad(iv)) {
      Mat& gb = tp.grad(iv);
      for (Eigen::Index i = 0; i < du; ++i)
        for (Eigen::Index j = 0; j < dv; ++j) gb.col(j).array() += g.col(i * dv + j).array() * a.col(i).array();
    }
  });
}

Var batch_gram(const Var& m) {
  Tape& t = *m.tape();
  const Eigen::Index d = square_dim(m.cols(), "batch_gram"), B = m.rows();
  const Mat& M = m.value();
  Mat out = Mat::Zero(B, d * d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index k = 0; k < d; ++k)
        out.col(i * d + j).array() += M.col(i * d + k).array() * M.col(j * d + k).array();
  const std::size_t im = m.id();
  return t.push(std::move(out), {im}, [im, d](Tape& tp, std::size_t self) {
    const Mat& g = tp.grad(self);
    const Mat& M = tp.value(im);
    Mat& gm = tp.grad(im);
    // d(M M^T)_{ij} / dM_{ik} = M_{jk}, and / dM_{jk} = M_{ik}.
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index k = 0; k < d; ++k) {
          gm.col(i * d + k).array() += g.col(i * d + j).array() * M.col(j * d + k).array();
          gm.col(j * d + k).array() += g.col(i * d + j).array() * M.col(i * d + k).array();
        }
  });
}

Var detach(const Var& x) { return x.tape()->constant(x.value()); }

}  // namespace rgan::ad
