#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

namespace smile {

class Tape;

namespace detail {

struct TensorNode {
  std::vector<int> shape;
  std::shared_ptr<const Eigen::ArrayXd> values;  // shared so reshape can alias
  bool requires_grad = false;
  Tape* tape = nullptr;
  std::uint64_t id = 0;
};

struct TapeAccess;

}  // namespace detail

/// Dense multi-dimensional array of doubles, row-major, owned by a Tape.
/// Copies are shallow handles to the same node.
class Tensor {
 public:
  Tensor() = default;

  bool valid() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  Eigen::Index size() const { return node_->values->size(); }
  const Eigen::ArrayXd& values() const { return *node_->values; }
  bool requires_grad() const { return node_->requires_grad; }

  /// Value of a size-1 tensor.
  double value() const;

 private:
  friend class Tape;
  friend struct detail::TapeAccess;
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

/// Records every differentiable operation executed on tensors it owns and
/// holds the gradient slots filled in by backward(). Single writer; a tape
/// and its tensors may move between threads but must not be shared mutably.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor variable(std::vector<int> shape, Eigen::ArrayXd values);
  Tensor constant(std::vector<int> shape, Eigen::ArrayXd values);

  /// Replays recorded adjoints in exact reverse execution order, seeding
  /// d(loss)/d(loss) = 1. Clears gradients from any previous backward first.
  /// Throws ContractError if loss is not a size-1 tensor of this tape.
  void backward(const Tensor& loss);

  /// Gradient accumulated for `t` by the latest backward(); exact zeros when
  /// `t` was on no path to the loss.
  Eigen::ArrayXd grad(const Tensor& t) const;

  std::size_t op_count() const { return records_.size(); }

  /// Drops all records and gradient slots. Existing tensors stay readable but
  /// must not be fed into further recorded ops.
  void clear();

 private:
  friend struct detail::TapeAccess;
  struct Record {
    std::uint64_t out_id = 0;
    std::vector<std::uint64_t> in_ids;
    std::function<void(Tape&)> pull;
  };

  Tensor make(std::vector<int> shape, Eigen::ArrayXd values, bool requires_grad);
  Tensor make(std::vector<int> shape, std::shared_ptr<const Eigen::ArrayXd> values,
              bool requires_grad);
  Eigen::ArrayXd& slot(const detail::TensorNode& node);
  const Eigen::ArrayXd* slot_if(std::uint64_t id) const;

  std::vector<Record> records_;
  std::unordered_map<std::uint64_t, Eigen::ArrayXd> grads_;
  std::uint64_t next_id_ = 1;
};

namespace detail {

/// Internal bridge used by the op implementations.
struct TapeAccess {
  static Tensor make(Tape& tape, std::vector<int> shape, Eigen::ArrayXd values,
                     bool requires_grad) {
    return tape.make(std::move(shape), std::move(values), requires_grad);
  }
  static Tensor make_view(Tape& tape, std::vector<int> shape,
                          std::shared_ptr<const Eigen::ArrayXd> values, bool requires_grad) {
    return tape.make(std::move(shape), std::move(values), requires_grad);
  }
  static const std::shared_ptr<const Eigen::ArrayXd>& values_ptr(const Tensor& t) {
    return t.node_->values;
  }
  static void record(Tape& tape, std::uint64_t out_id, std::vector<std::uint64_t> in_ids,
                     std::function<void(Tape&)> pull) {
    tape.records_.push_back(Tape::Record{out_id, std::move(in_ids), std::move(pull)});
  }
  static Eigen::ArrayXd& slot(Tape& tape, const Tensor& t) { return tape.slot(*t.node_); }
  static const Eigen::ArrayXd* slot_if(const Tape& tape, const Tensor& t) {
    return tape.slot_if(t.node_->id);
  }
  static detail::TensorNode& node(const Tensor& t) { return *t.node_; }
  static Tape* tape_of(const Tensor& t) { return t.node_ ? t.node_->tape : nullptr; }
};

}  // namespace detail

}  // namespace smile
