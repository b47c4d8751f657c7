#include "catse/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "catse/errors.hpp"

namespace catse {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(std::span<const double>)> backward_fn;

  bool tracked() const { return requires_grad || static_cast<bool>(backward_fn); }
};

}  // namespace detail

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using Stride = Eigen::OuterStride<>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Stride>;
using MutStridedMap = Eigen::Map<RowMat, 0, Stride>;

void require(bool condition, const std::string& what) {
  if (!condition) throw DimensionError(what);
}

const detail::Node& node_of(const Tensor& t) {
  if (!t.defined()) throw UsageError("operation on an undefined tensor");
  return *t.node();
}

bool is_prefix(const Shape& prefix, const Shape& full) {
  if (prefix.size() > full.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), full.begin());
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << " x ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return node_of(*this).value.size(); }

std::span<const double> Tensor::values() const { return node_of(*this).value; }

std::span<double> Tensor::mutable_values() {
  node_of(*this);
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }

bool Tensor::tracked() const { return defined() && node_->tracked(); }

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const { return node_of(*this).grad; }

std::span<double> Tensor::mutable_grad() { return grad_sink(*this); }

void Tensor::zero_grad() {
  node_of(*this);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const auto& n = node_of(*this);
  return Tensor(n.shape, n.value, false);
}

Tensor Tensor::clone() const {
  const auto& n = node_of(*this);
  return Tensor(n.shape, n.value, n.requires_grad);
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_to_string(this->shape()) + " to " +
                         shape_to_string(shape));
  }
  Tensor self = *this;
  return make_op_result(std::move(shape), node_->value, {self},
                        [self](std::span<const double> g) {
                          auto sink = grad_sink(self);
                          for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += g[i];
                        });
}

void Tensor::backward() const {
  const auto& root = node_of(*this);
  if (root.value.size() != 1) {
    throw UsageError("backward() requires a scalar, got " + shape_to_string(root.shape));
  }
  if (!root.tracked()) throw UsageError("backward() on a tensor that is not part of a tracked graph");

  // Iterative post-order DFS gives a topological order of tracked nodes.
  // Owning handles keep nodes alive while closures are released below.
  using NodePtr = std::shared_ptr<detail::Node>;
  std::vector<NodePtr> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(node_, 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [current, next_parent] = stack.back();
    if (next_parent < current->parents.size()) {
      NodePtr parent = current->parents[next_parent++];
      if (parent->tracked() && seen.insert(parent.get()).second) stack.emplace_back(std::move(parent), 0);
    } else {
      order.push_back(std::move(current));
      stack.pop_back();
    }
  }

  if (node_->grad.empty()) node_->grad.assign(1, 0.0);
  node_->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = it->get();
    if (!n->backward_fn) continue;
    if (!n->grad.empty()) n->backward_fn(n->grad);
    // Interior nodes are single-use: drop closures and gradient buffers.
    n->backward_fn = nullptr;
    n->parents.clear();
    if (!n->requires_grad) std::vector<double>().swap(n->grad);
  }
}

Tensor make_op_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                      std::function<void(std::span<const double>)> backward_fn) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value produced by tensor operation");
  }
  Tensor out(std::move(shape), std::move(values), false);
  const bool any_tracked =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.tracked(); });
  if (any_tracked && backward_fn) {
    for (const auto& t : inputs) {
      if (t.tracked()) out.node_->parents.push_back(t.node());
    }
    out.node_->backward_fn = std::move(backward_fn);
  }
  return out;
}

Tensor make_op_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                      std::function<void(std::span<const double>)> backward_fn) {
  return make_op_result(std::move(shape), std::move(values), std::vector<Tensor>(inputs),
                        std::move(backward_fn));
}

std::span<double> grad_sink(const Tensor& t) {
  if (!t.tracked()) return {};
  auto& n = *t.node();
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

// ---------------------------------------------------------------------------
// Convolution

Tensor conv1d_causal(const Tensor& input, const Tensor& weight, const Tensor& bias,
                     std::size_t dilation, std::size_t groups) {
  require(input.rank() == 2, "conv1d_causal: input must be [C_in x T], got " +
                                 shape_to_string(input.shape()));
  require(weight.rank() == 3, "conv1d_causal: weight must be [C_out x C_in/groups x K]");
  if (groups == 0 || dilation == 0) throw UsageError("conv1d_causal: groups and dilation must be >= 1");
  const std::size_t c_in = input.dim(0), frames = input.dim(1);
  const std::size_t c_out = weight.dim(0), cin_g = weight.dim(1), taps = weight.dim(2);
  require(taps >= 1, "conv1d_causal: kernel size must be >= 1");
  require(c_in % groups == 0 && c_out % groups == 0,
          "conv1d_causal: channels not divisible by groups");
  require(cin_g == c_in / groups, "conv1d_causal: weight " + shape_to_string(weight.shape()) +
                                      " incompatible with input " + shape_to_string(input.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == c_out, "conv1d_causal: bias length must equal C_out");
  const std::size_t cout_g = c_out / groups;

  const auto x = input.values();
  const auto w = weight.values();
  std::vector<double> out(c_out * frames, 0.0);

  const bool depthwise = cin_g == 1 && cout_g == 1;
  if (depthwise) {
    for (std::size_t c = 0; c < c_out; ++c) {
      const double b = has_bias ? bias[c] : 0.0;
      const double* xc = x.data() + c * frames;
      const double* wc = w.data() + c * taps;
      double* oc = out.data() + c * frames;
      for (std::size_t t = 0; t < frames; ++t) {
        double acc = b;
        for (std::size_t k = 0; k < taps; ++k) {
          const std::size_t shift = (taps - 1 - k) * dilation;
          if (t >= shift) acc += wc[k] * xc[t - shift];
        }
        oc[t] = acc;
      }
    }
  } else {
    std::vector<double> tap(cout_g * cin_g);
    for (std::size_t g = 0; g < groups; ++g) {
      for (std::size_t k = 0; k < taps; ++k) {
        const std::size_t shift = (taps - 1 - k) * dilation;
        if (shift >= frames) continue;
        for (std::size_t o = 0; o < cout_g; ++o)
          for (std::size_t i = 0; i < cin_g; ++i)
            tap[o * cin_g + i] = w[((g * cout_g + o) * cin_g + i) * taps + k];
        ConstMap wk(tap.data(), cout_g, cin_g);
        ConstStridedMap xs(x.data() + g * cin_g * frames, cin_g, frames - shift, Stride(frames));
        MutStridedMap os(out.data() + g * cout_g * frames + shift, cout_g, frames - shift,
                         Stride(frames));
        os.noalias() += wk * xs;
      }
    }
    if (has_bias) {
      const auto bv = bias.values();
      for (std::size_t c = 0; c < c_out; ++c) {
        double* oc = out.data() + c * frames;
        for (std::size_t t = 0; t < frames; ++t) oc[t] += bv[c];
      }
    }
  }

  std::vector<Tensor> inputs{input, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op_result(
      {c_out, frames}, std::move(out), inputs,
      [=](std::span<const double> gout) {
        auto gx = grad_sink(input);
        auto gw = grad_sink(weight);
        auto gb = has_bias ? grad_sink(bias) : std::span<double>{};
        const auto xv = input.values();
        const auto wv = weight.values();
        if (!gb.empty()) {
          for (std::size_t c = 0; c < c_out; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < frames; ++t) acc += gout[c * frames + t];
            gb[c] += acc;
          }
        }
        if (depthwise) {
          for (std::size_t c = 0; c < c_out; ++c) {
            const double* go = gout.data() + c * frames;
            for (std::size_t k = 0; k < taps; ++k) {
              const std::size_t shift = (taps - 1 - k) * dilation;
              if (shift >= frames) continue;
              const double* xc = xv.data() + c * frames;
              if (!gw.empty()) {
                double acc = 0.0;
                for (std::size_t t = shift; t < frames; ++t) acc += go[t] * xc[t - shift];
                gw[c * taps + k] += acc;
              }
              if (!gx.empty()) {
                const double wk = wv[c * taps + k];
                double* gxc = gx.data() + c * frames;
                for (std::size_t t = shift; t < frames; ++t) gxc[t - shift] += wk * go[t];
              }
            }
          }
          return;
        }
        std::vector<double> tap_w(cout_g * cin_g), tap_g(cout_g * cin_g);
        for (std::size_t g = 0; g < groups; ++g) {
          for (std::size_t k = 0; k < taps; ++k) {
            const std::size_t shift = (taps - 1 - k) * dilation;
            if (shift >= frames) continue;
            ConstStridedMap go(gout.data() + g * cout_g * frames + shift, cout_g, frames - shift,
                               Stride(frames));
            if (!gx.empty()) {
              for (std::size_t o = 0; o < cout_g; ++o)
                for (std::size_t i = 0; i < cin_g; ++i)
                  tap_w[o * cin_g + i] = wv[((g * cout_g + o) * cin_g + i) * taps + k];
              ConstMap wk(tap_w.data(), cout_g, cin_g);
              MutStridedMap gxs(gx.data() + g * cin_g * frames, cin_g, frames - shift,
                                Stride(frames));
              gxs.noalias() += wk.transpose() * go;
            }
            if (!gw.empty()) {
              ConstStridedMap xs(xv.data() + g * cin_g * frames, cin_g, frames - shift,
                                 Stride(frames));
              MutMap tg(tap_g.data(), cout_g, cin_g);
              tg.noalias() = go * xs.transpose();
              for (std::size_t o = 0; o < cout_g; ++o)
                for (std::size_t i = 0; i < cin_g; ++i)
                  gw[((g * cout_g + o) * cin_g + i) * taps + k] += tap_g[o * cin_g + i];
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Fully connected

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require(input.rank() >= 1, "fully_connected: input must have rank >= 1");
  require(weight.rank() == 2, "fully_connected: weight must be [D_out x D_in]");
  const std::size_t d_in = input.shape().back();
  const std::size_t d_out = weight.dim(0);
  require(weight.dim(1) == d_in, "fully_connected: trailing dimension " + std::to_string(d_in) +
                                     " does not match weight " + shape_to_string(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.numel() == d_out, "fully_connected: bias length must equal D_out");
  const std::size_t rows = input.numel() / d_in;

  Shape out_shape = input.shape();
  out_shape.back() = d_out;
  std::vector<double> out(rows * d_out);
  ConstMap x(input.values().data(), rows, d_in);
  ConstMap w(weight.values().data(), d_out, d_in);
  MutMap y(out.data(), rows, d_out);
  y.noalias() = x * w.transpose();
  if (has_bias) {
    const auto bv = bias.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t o = 0; o < d_out; ++o) out[r * d_out + o] += bv[o];
  }

  std::vector<Tensor> inputs{input, weight};
  if (has_bias) inputs.push_back(bias);
  return make_op_result(std::move(out_shape), std::move(out), inputs,
                        [=](std::span<const double> gout) {
                          ConstMap gy(gout.data(), rows, d_out);
                          if (auto gx = grad_sink(input); !gx.empty()) {
                            MutMap(gx.data(), rows, d_in).noalias() +=
                                gy * ConstMap(weight.values().data(), d_out, d_in);
                          }
                          if (auto gw = grad_sink(weight); !gw.empty()) {
                            MutMap(gw.data(), d_out, d_in).noalias() +=
                                gy.transpose() * ConstMap(input.values().data(), rows, d_in);
                          }
                          if (has_bias) {
                            if (auto gb = grad_sink(bias); !gb.empty()) {
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t o = 0; o < d_out; ++o)
                                  gb[o] += gout[r * d_out + o];
                            }
                          }
                        });
}

// ---------------------------------------------------------------------------
// Activations

Tensor relu(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return make_op_result(x.shape(), std::move(out), {x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    const auto xv = x.values();
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xv[i] > 0.0) gx[i] += g[i];
  });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
  require(slope.defined() && slope.numel() == 1, "prelu: slope must be a single value");
  const double a = slope[0];
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] >= 0.0 ? xv[i] : a * xv[i];
  return make_op_result(x.shape(), std::move(out), {x, slope},
                        [x, slope](std::span<const double> g) {
                          const double a = slope[0];
                          const auto xv = x.values();
                          if (auto gx = grad_sink(x); !gx.empty()) {
                            for (std::size_t i = 0; i < gx.size(); ++i)
                              gx[i] += xv[i] >= 0.0 ? g[i] : a * g[i];
                          }
                          if (auto ga = grad_sink(slope); !ga.empty()) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < xv.size(); ++i)
                              if (xv[i] < 0.0) acc += xv[i] * g[i];
                            ga[0] += acc;
                          }
                        });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] >= 0.0 ? xv[i] : slope * xv[i];
  return make_op_result(x.shape(), std::move(out), {x}, [x, slope](std::span<const double> g) {
    auto gx = grad_sink(x);
    const auto xv = x.values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += xv[i] >= 0.0 ? g[i] : slope * g[i];
  });
}

Tensor sigmoid(const Tensor& x) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double y = 1.0 / (1.0 + std::exp(-xv[i]));
    out[i] = std::clamp(y, kSigmoidFloor, 1.0 - kSigmoidFloor);
  }
  if (!x.tracked()) return make_op_result(x.shape(), std::move(out), {x}, nullptr);
  std::vector<double> saved = out;
  return make_op_result(x.shape(), std::move(out), {x},
                        [x, saved = std::move(saved)](std::span<const double> g) {
                          auto gx = grad_sink(x);
                          for (std::size_t i = 0; i < gx.size(); ++i)
                            gx[i] += g[i] * saved[i] * (1.0 - saved[i]);
                        });
}

Tensor activation(const Tensor& x, ActivationKind kind, const Tensor& slope) {
  switch (kind) {
    case ActivationKind::relu:
      return relu(x);
    case ActivationKind::prelu:
      return prelu(x, slope);
    case ActivationKind::leaky_relu:
      return leaky_relu(x);
    case ActivationKind::sigmoid:
      return sigmoid(x);
  }
  throw UsageError("unknown activation kind");
}

// ---------------------------------------------------------------------------
// Cumulative global layer norm

Tensor cgln(const Tensor& input, const Tensor& gain, const Tensor& bias, double eps) {
  require(input.rank() == 2, "cgln: input must be [C x T]");
  const std::size_t channels = input.dim(0), frames = input.dim(1);
  require(frames >= 1, "cgln: need at least one frame");
  require(gain.numel() == channels && bias.numel() == channels,
          "cgln: gain and bias must have one entry per channel");
  if (!(eps > 0.0)) throw UsageError("cgln: eps must be positive");

  const auto x = input.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<double> mean(frames), inv_std(frames);
  std::vector<unsigned char> clamped(frames, 0);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    double f1 = 0.0, f2 = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = x[c * frames + t];
      f1 += v;
      f2 += v * v;
    }
    s1 += f1;
    s2 += f2;
    const double n = static_cast<double>(channels * (t + 1));
    const double mu = s1 / n;
    double var = s2 / n - mu * mu;
    if (var < 0.0) {
      var = 0.0;
      clamped[t] = 1;
    }
    mean[t] = mu;
    inv_std[t] = 1.0 / std::sqrt(var + eps);
  }
  std::vector<double> out(channels * frames);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < frames; ++t)
      out[c * frames + t] = gv[c] * (x[c * frames + t] - mean[t]) * inv_std[t] + bv[c];

  return make_op_result(
      input.shape(), std::move(out), {input, gain, bias},
      [=](std::span<const double> g) {
        const auto x = input.values();
        const auto gv = gain.values();
        if (auto gg = grad_sink(gain); !gg.empty()) {
          for (std::size_t c = 0; c < channels; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < frames; ++t)
              acc += g[c * frames + t] * (x[c * frames + t] - mean[t]) * inv_std[t];
            gg[c] += acc;
          }
        }
        if (auto gb = grad_sink(bias); !gb.empty()) {
          for (std::size_t c = 0; c < channels; ++c) {
            double acc = 0.0;
            for (std::size_t t = 0; t < frames; ++t) acc += g[c * frames + t];
            gb[c] += acc;
          }
        }
        auto gx = grad_sink(input);
        if (gx.empty()) return;
        // Per frame: gradients w.r.t. the cumulative sums S1_t and S2_t; an
        // input at frame t' feeds every S_t with t >= t'.
        std::vector<double> d_s1(frames), d_s2(frames);
        for (std::size_t t = 0; t < frames; ++t) {
          double a = 0.0, b = 0.0;
          for (std::size_t c = 0; c < channels; ++c) {
            const double dxhat = g[c * frames + t] * gv[c];
            a += dxhat;
            b += dxhat * (x[c * frames + t] - mean[t]);
          }
          const double is = inv_std[t];
          const double d_var = clamped[t] ? 0.0 : -0.5 * b * is * is * is;
          const double d_mean = -a * is - 2.0 * mean[t] * d_var;
          const double n = static_cast<double>(channels * (t + 1));
          d_s1[t] = d_mean / n;
          d_s2[t] = d_var / n;
        }
        double r1 = 0.0, r2 = 0.0;
        for (std::size_t t = frames; t-- > 0;) {
          r1 += d_s1[t];
          r2 += d_s2[t];
          for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t i = c * frames + t;
            gx[i] += g[i] * gv[c] * inv_std[t] + r1 + 2.0 * x[i] * r2;
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Pooling

Tensor maxpool1d(const Tensor& input, std::size_t window) {
  require(input.rank() == 2, "maxpool1d: input must be [C x T]");
  if (window == 0) throw UsageError("maxpool1d: window must be >= 1");
  const std::size_t channels = input.dim(0), frames = input.dim(1);
  require(frames >= window, "maxpool1d: " + std::to_string(frames) +
                                " frames shorter than window " + std::to_string(window));
  const std::size_t pooled = frames / window;
  const auto x = input.values();
  std::vector<double> out(channels * pooled);
  std::vector<std::size_t> argmax(channels * pooled);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < pooled; ++p) {
      std::size_t best = c * frames + p * window;
      for (std::size_t k = 1; k < window; ++k) {
        const std::size_t i = c * frames + p * window + k;
        if (x[i] > x[best]) best = i;
      }
      out[c * pooled + p] = x[best];
      argmax[c * pooled + p] = best;
    }
  }
  return make_op_result({channels, pooled}, std::move(out), {input},
                        [input, argmax = std::move(argmax)](std::span<const double> g) {
                          auto gx = grad_sink(input);
                          for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
                        });
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

enum class Binary { add, sub, mul };

// Number of consecutive elements of `a` that share one element of `b`.
std::size_t broadcast_inner(const Tensor& a, const Tensor& b, const char* name) {
  if (a.shape() == b.shape()) return 1;
  if (b.numel() == 1) return a.numel();
  if (is_prefix(b.shape(), a.shape())) return a.numel() / b.numel();
  throw DimensionError(std::string(name) + ": shapes " + shape_to_string(a.shape()) + " and " +
                       shape_to_string(b.shape()) + " are not broadcast-compatible");
}

Tensor binary_op(const Tensor& a_in, const Tensor& b_in, Binary op, const char* name) {
  Tensor a = a_in, b = b_in;
  // add/mul commute, so let the larger operand lead.
  if (op != Binary::sub && a.numel() < b.numel()) std::swap(a, b);
  const std::size_t inner = broadcast_inner(a, b, name);
  const std::size_t n = a.numel();
  const std::size_t blocks = n / inner;
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n);
  if (blocks == n) {
    switch (op) {
      case Binary::add: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i]; break;
      case Binary::sub: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i]; break;
      case Binary::mul: for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i]; break;
    }
  }
  for (std::size_t j = 0; j < blocks && blocks != n; ++j) {
    const double y = bv[j];
    const double* ap = av.data() + j * inner;
    double* dst = out.data() + j * inner;
    switch (op) {
      case Binary::add: for (std::size_t i = 0; i < inner; ++i) dst[i] = ap[i] + y; break;
      case Binary::sub: for (std::size_t i = 0; i < inner; ++i) dst[i] = ap[i] - y; break;
      case Binary::mul: for (std::size_t i = 0; i < inner; ++i) dst[i] = ap[i] * y; break;
    }
  }
  return make_op_result(a.shape(), std::move(out), {a, b},
                        [a, b, op, inner, blocks](std::span<const double> g) {
                          auto ga = grad_sink(a);
                          auto gb = grad_sink(b);
                          const auto av = a.values();
                          const auto bv = b.values();
                          if (blocks == av.size()) {
                            const double sign = op == Binary::sub ? -1.0 : 1.0;
                            for (std::size_t i = 0; i < av.size(); ++i) {
                              if (!ga.empty()) ga[i] += op == Binary::mul ? g[i] * bv[i] : g[i];
                              if (!gb.empty()) gb[i] += op == Binary::mul ? g[i] * av[i] : sign * g[i];
                            }
                            return;
                          }
                          for (std::size_t j = 0; j < blocks; ++j) {
                            const double* gp = g.data() + j * inner;
                            const double* ap = av.data() + j * inner;
                            if (!ga.empty()) {
                              double* gap = ga.data() + j * inner;
                              if (op == Binary::mul) {
                                for (std::size_t i = 0; i < inner; ++i) gap[i] += gp[i] * bv[j];
                              } else {
                                for (std::size_t i = 0; i < inner; ++i) gap[i] += gp[i];
                              }
                            }
                            if (!gb.empty()) {
                              double acc = 0.0;
                              if (op == Binary::mul) {
                                for (std::size_t i = 0; i < inner; ++i) acc += gp[i] * ap[i];
                              } else {
                                for (std::size_t i = 0; i < inner; ++i) acc += gp[i];
                              }
                              gb[j] += op == Binary::sub ? -acc : acc;
                            }
                          }
                        });
}

}  // namespace

Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::mul, "mul"); }
Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, Binary::sub, "sub"); }

Tensor scale(const Tensor& a, double factor) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
  return make_op_result(a.shape(), std::move(out), {a}, [a, factor](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
  });
}

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis) {
  if (tensors.empty()) throw UsageError("concat: no tensors");
  const Shape& first = tensors.front().shape();
  require(axis < first.size(), "concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& t : tensors) {
    const Shape& s = t.shape();
    require(s.size() == first.size(), "concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis) require(s[d] == first[d], "concat: incompatible shapes");
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  const std::size_t out_row = out_shape[axis] * inner;

  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    offsets.push_back(offset);
    const std::size_t row = t.dim(axis) * inner;
    const auto v = t.values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * row, row, out.data() + o * out_row + offset);
    offset += row;
  }
  return make_op_result(std::move(out_shape), std::move(out), tensors,
                        [tensors, offsets, outer, inner, out_row, axis](std::span<const double> g) {
                          for (std::size_t k = 0; k < tensors.size(); ++k) {
                            auto gt = grad_sink(tensors[k]);
                            if (gt.empty()) continue;
                            const std::size_t row = tensors[k].dim(axis) * inner;
                            for (std::size_t o = 0; o < outer; ++o)
                              for (std::size_t i = 0; i < row; ++i)
                                gt[o * row + i] += g[o * out_row + offsets[k] + i];
                          }
                        });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  const auto xv = x.values();
  const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
  return make_op_result({1}, {total}, {x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean_last_axis(const Tensor& x) {
  require(x.rank() == 2, "mean_last_axis: input must be [C x T]");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  require(cols >= 1, "mean_last_axis: empty trailing axis");
  const auto xv = x.values();
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += xv[r * cols + c];
    out[r] = acc / static_cast<double>(cols);
  }
  return make_op_result({rows}, std::move(out), {x}, [x, rows, cols](std::span<const double> g) {
    auto gx = grad_sink(x);
    const double inv = 1.0 / static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r] * inv;
  });
}

}  // namespace catse
