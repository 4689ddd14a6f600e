#include "relfb/numerics/autodiff.hpp"

#include <unordered_set>
#include <utility>

#include "relfb/numerics/errors.hpp"

namespace relfb {
namespace {

thread_local bool g_record_grad = true;

}  // namespace

Tensor& Node::grad_buffer() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) {
    grad = Tensor(value.shape(), 0.0);
  }
  return grad;
}

Var Var::constant(Tensor value) { return leaf(std::move(value), false); }

Var Var::leaf(Tensor value, bool track_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->track_grad = track_grad;
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward on undefined Var");
  if (loss.size() != 1) {
    throw DimensionError("backward requires a scalar loss, got shape " +
                         shape_string(loss.shape()));
  }
  Node* root = loss.node().get();
  if (root->released) {
    throw std::logic_error("backward called twice on the same graph");
  }
  if (!root->track_grad) return;

  // Iterative post-order DFS gives a topological order (inputs first). The
  // order holds owning pointers because releasing a node drops its inputs.
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->inputs.size()) {
      std::shared_ptr<Node> child = top.first->inputs[top.second++];
      if (child->track_grad && visited.insert(child.get()).second) {
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& node = **it;
    if (!node.backward) continue;
    node.grad_buffer();
    node.backward(node);
    node.backward = nullptr;
    node.inputs.clear();
    node.grad = Tensor();
    node.released = true;
  }
}

NoGradGuard::NoGradGuard() : previous_(g_record_grad) { g_record_grad = false; }
NoGradGuard::~NoGradGuard() { g_record_grad = previous_; }

bool grad_recording_enabled() noexcept { return g_record_grad; }

Parameter::Parameter(std::string name, std::string group, Tensor init)
    : name_(std::move(name)),
      group_(std::move(group)),
      var_(Var::leaf(std::move(init), true)) {}

void Parameter::zero_grad() { grad().fill(0.0); }

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace relfb
