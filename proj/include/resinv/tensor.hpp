#pragma once

// Dense f64 tensors with reverse-mode gradient recording.
//
// A Tensor is a cheap handle onto shared storage. Operations on tensors that
// require gradients record a node holding their inputs and a backward rule;
// Graph::trace() recovers those nodes in execution order from a scalar loss.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace resinv {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::uint64_t order = 0;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Zero-initialised gradient buffer, allocated on first use.
  std::vector<double>& grad_buffer();
};

std::uint64_t next_order();

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t numel() const;

  std::span<const double> data() const;
  /// Writable view. Only valid on leaves; mutating a recorded intermediate
  /// would silently corrupt its backward rule.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  /// Accumulated gradient (zeros when none has been accumulated yet).
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Value copy with no gradient history.
  Tensor detach() const;
  /// Same storage semantics as detach() but keeps requires_grad as a fresh leaf.
  Tensor clone_leaf(bool requires_grad) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Disables gradient recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Recorded operations reachable from a loss, in execution order.
class Graph {
 public:
  static Graph trace(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  std::vector<std::string> op_names() const;

  /// Seeds d(loss)/d(loss) = 1 and runs every backward rule once, in
  /// reverse execution order. Leaf gradients accumulate across calls;
  /// intermediate gradients are reset first.
  void backward() const;

 private:
  Tensor loss_;
  std::vector<detail::Node*> nodes_;
};

/// Convenience for Graph::trace(loss).backward(). The loss must be scalar.
void backward(const Tensor& loss);

/// Builds a result tensor, checking every value is finite. When recording
/// is on and any input requires a gradient, attaches the backward rule.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> inputs, std::function<void(detail::Node&)> backward);

}  // namespace resinv
