#include "resinv/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "resinv/errors.hpp"

namespace resinv {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

std::uint64_t next_order() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  for (std::size_t d : shape) require(d > 0, "tensor extents must be positive, got " + shape_str(shape));
}

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) contract_fail(std::string("non-finite value produced by ") + op);
}

std::shared_ptr<detail::Node> new_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != data.size())
    contract_fail("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  check_finite("tensor construction", data);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  node->order = detail::next_order();
  return node;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  std::vector<double> data(shape_numel(shape), value);
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const {
  require(defined(), "use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < shape().size(), "axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::data() const {
  require(defined(), "use of undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  require(defined(), "use of undefined tensor");
  require(node_->leaf, std::string("mutable_data() on recorded result of ") + node_->op);
  return node_->value;
}

double Tensor::item() const {
  require(numel() == 1, "item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  require(defined() && node_->leaf, "requires_grad can only be set on leaves");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  require(defined(), "use of undefined tensor");
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require(defined(), "use of undefined tensor");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (defined()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(new_leaf(shape(), node_->value, false)); }

Tensor Tensor::clone_leaf(bool requires_grad) const {
  return Tensor(new_leaf(shape(), node_->value, requires_grad));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> inputs, std::function<void(detail::Node&)> backward) {
  check_finite(op, value);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  node->leaf = false;
  node->order = detail::next_order();
  bool needs = false;
  if (g_grad_enabled)
    for (const Tensor& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const Tensor& t : inputs) node->inputs.push_back(t.node_ptr());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Graph Graph::trace(const Tensor& loss) {
  require(loss.defined(), "backward on undefined tensor");
  Graph g;
  g.loss_ = loss;
  std::vector<detail::Node*> stack{loss.node()};
  std::unordered_set<detail::Node*> seen{loss.node()};
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || n->leaf) continue;
    g.nodes_.push_back(n);
    for (const auto& in : n->inputs)
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
  }
  // Creation order is a valid topological order.
  std::sort(g.nodes_.begin(), g.nodes_.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->order < b->order; });
  return g;
}

std::vector<std::string> Graph::op_names() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (const auto* n : nodes_) names.emplace_back(n->op);
  return names;
}

void Graph::backward() const {
  require(loss_.numel() == 1, "backward requires a scalar loss, got shape " + shape_str(loss_.shape()));
  detail::Node* root = loss_.node();
  if (!root->requires_grad) return;
  for (auto* n : nodes_) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  root->grad_buffer()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    detail::Node* n = *it;
    if (n->grad.empty()) continue;
    n->backward(*n);
    if (n != root) std::vector<double>().swap(n->grad);
  }
}

void backward(const Tensor& loss) { Graph::trace(loss).backward(); }

}  // namespace resinv
