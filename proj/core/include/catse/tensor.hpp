#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace catse {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

// Dense row-major array of doubles with optional reverse-mode gradient
// tracking. Tensor is a shared handle: copies alias the same storage, which is
// how parameter collections, optimizers and graphs refer to one value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Direct write access; intended for leaves (parameters, inputs).
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  // True when the tensor participates in a graph that can be differentiated.
  bool tracked() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from a scalar. Gradients accumulate into every leaf
  // with requires_grad; the graph is released afterwards.
  void backward() const;

  // Same values, no graph history, no gradient.
  Tensor detach() const;
  Tensor clone() const;
  // Same storage viewed under a new shape with identical element count.
  Tensor reshape(Shape shape) const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op_result(Shape, std::vector<double>,
                               std::initializer_list<Tensor>,
                               std::function<void(std::span<const double>)>);
  friend Tensor make_op_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                               std::function<void(std::span<const double>)>);
};

// Builds the output of a differentiable operator. `backward_fn` receives the
// output gradient and must add its contribution into the inputs via
// grad_sink(). When no input is tracked, the closure is discarded and the
// result is a plain constant. Non-finite output values raise NumericError.
Tensor make_op_result(Shape shape, std::vector<double> values,
                      std::initializer_list<Tensor> inputs,
                      std::function<void(std::span<const double>)> backward_fn);
Tensor make_op_result(Shape shape, std::vector<double> values,
                      const std::vector<Tensor>& inputs,
                      std::function<void(std::span<const double>)> backward_fn);

// Gradient buffer of `t`, allocated (zeroed) on first use. Returns an empty
// span when `t` is not tracked, so backward closures can skip work.
std::span<double> grad_sink(const Tensor& t);

// ---------------------------------------------------------------------------
// Operators

// Causal 1-D convolution over a [C_in x T] map. Weight layout is
// [C_out x C_in/groups x K]; output frame t reads input frames
// t - (K-1)*dilation ... t, zeros to the left of frame 0.
Tensor conv1d_causal(const Tensor& input, const Tensor& weight, const Tensor& bias,
                     std::size_t dilation = 1, std::size_t groups = 1);

// Affine map along the trailing axis: [... x D_in] -> [... x D_out].
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

enum class ActivationKind { relu, prelu, leaky_relu, sigmoid };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kPreluInit = 0.25;
// Sigmoid outputs are clamped to [kSigmoidFloor, 1 - kSigmoidFloor] so they
// stay strictly inside (0, 1) in floating point.
inline constexpr double kSigmoidFloor = 1e-12;

Tensor relu(const Tensor& x);
// `slope` is a single-element learnable tensor.
Tensor prelu(const Tensor& x, const Tensor& slope);
Tensor leaky_relu(const Tensor& x, double slope = kLeakySlope);
Tensor sigmoid(const Tensor& x);
// Dispatch form; `slope` is only read for prelu.
Tensor activation(const Tensor& x, ActivationKind kind, const Tensor& slope = {});

inline constexpr double kCglnEps = 1e-8;

// Cumulative global layer norm over a [C x T] map: frame t is normalized by the
// mean and population variance of all channels over frames 0..t.
Tensor cgln(const Tensor& input, const Tensor& gain, const Tensor& bias,
            double eps = kCglnEps);

// Non-overlapping max pooling along time on [C x T]; T < window is an error.
Tensor maxpool1d(const Tensor& input, std::size_t window);

// Elementwise ops. `b` broadcasts when its shape is a leading prefix of a's
// shape (e.g. a [C] vector against a [C x T] map) or when it has one element.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor concat(const std::vector<Tensor>& tensors, std::size_t axis);

// Reductions to a single-element tensor.
Tensor sum(const Tensor& x);
// [C x T] -> [C], mean over the trailing axis.
Tensor mean_last_axis(const Tensor& x);

}  // namespace catse
