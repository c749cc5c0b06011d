#include "smile/tensor.hpp"

#include <unordered_set>

#include "smile/errors.hpp"

namespace smile {

double Tensor::value() const {
  if (!node_ || node_->values->size() != 1) {
    throw ContractError("Tensor::value: tensor is not a scalar");
  }
  return (*node_->values)[0];
}

Tensor Tape::make(std::vector<int> shape, Eigen::ArrayXd values, bool requires_grad) {
  return make(std::move(shape),
              std::make_shared<const Eigen::ArrayXd>(std::move(values)), requires_grad);
}

Tensor Tape::make(std::vector<int> shape, std::shared_ptr<const Eigen::ArrayXd> values,
                  bool requires_grad) {
  Eigen::Index count = 1;
  for (int e : shape) {
    if (e <= 0) throw DimensionError("tensor extents must be positive");
    count *= e;
  }
  if (count != values->size()) {
    throw DimensionError("shape does not match value count");
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  node->tape = this;
  node->id = next_id_++;
  return Tensor(std::move(node));
}

Tensor Tape::variable(std::vector<int> shape, Eigen::ArrayXd values) {
  return make(std::move(shape), std::move(values), true);
}

Tensor Tape::constant(std::vector<int> shape, Eigen::ArrayXd values) {
  return make(std::move(shape), std::move(values), false);
}

Eigen::ArrayXd& Tape::slot(const detail::TensorNode& node) {
  auto it = grads_.find(node.id);
  if (it == grads_.end()) {
    it = grads_.emplace(node.id, Eigen::ArrayXd::Zero(node.values->size())).first;
  }
  return it->second;
}

const Eigen::ArrayXd* Tape::slot_if(std::uint64_t id) const {
  auto it = grads_.find(id);
  return it == grads_.end() ? nullptr : &it->second;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.valid() || loss.node_->tape != this) {
    throw ContractError("backward: loss does not belong to this tape");
  }
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar");
  }
  grads_.clear();
  slot(*loss.node_) = Eigen::ArrayXd::Ones(1);

  std::unordered_set<std::uint64_t> live;
  live.insert(loss.node_->id);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (live.find(it->out_id) == live.end()) continue;
    it->pull(*this);
    for (std::uint64_t id : it->in_ids) live.insert(id);
  }
}

Eigen::ArrayXd Tape::grad(const Tensor& t) const {
  if (!t.valid()) throw ContractError("grad: invalid tensor");
  if (const Eigen::ArrayXd* g = slot_if(t.node_->id)) return *g;
  return Eigen::ArrayXd::Zero(t.size());
}

void Tape::clear() {
  records_.clear();
  grads_.clear();
}

}  // namespace smile
