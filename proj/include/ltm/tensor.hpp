#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ltm {

using Shape = std::vector<std::size_t>;

/// 64-byte aligned allocation. Vectorized kernels pick their code path from the
/// buffer address, so fixed alignment keeps results a function of shape and value.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names every shape involved.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an API precondition that is not about shapes is violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// A Tensor is a cheap handle: copies share storage. Values are treated as
/// immutable once an op has consumed them; only parameters are updated in place
/// (by the optimizer, between tapes).
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor from_buffer(Shape shape, Buffer data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  /// Size of `axis`; negative values count from the back.
  std::size_t dim(int axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  /// Empty span until a gradient has been accumulated.
  std::span<const double> grad() const;
  /// Allocates a zero gradient on first use.
  std::span<double> mutable_grad() const;
  void zero_grad() const;

  std::uint64_t producer() const;
  void set_producer(std::uint64_t tape_id);

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    Buffer data;
    Buffer grad;
    bool requires_grad = false;
    std::uint64_t producer = 0;
  };
  std::shared_ptr<Impl> impl_;
};

/// Linear record of executed ops and their backward rules.
///
/// Ops append in execution order, so replaying the record in reverse is a valid
/// topological order. An inference tape records nothing and produces tensors that
/// never require gradients.
class Tape {
 public:
  enum class Mode { kTrain, kInference };

  explicit Tape(Mode mode = Mode::kTrain);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == Mode::kTrain; }
  std::uint64_t id() const { return id_; }
  std::size_t size() const { return backward_rules_.size(); }

  /// True when the op should be taped, i.e. recording and any input needs a gradient.
  bool wants(std::initializer_list<const Tensor*> inputs) const;

  /// Marks `out` as produced by this tape and appends its backward rule.
  void record(Tensor& out, std::function<void()> backward_rule);
  /// Marks `out` as produced by this tape without a backward rule.
  void adopt(Tensor& out) const { out.set_producer(id_); }

  void clear();

 private:
  friend void backward(const Tensor& loss, Tape& tape);

  Mode mode_;
  std::uint64_t id_;
  std::vector<std::function<void()>> backward_rules_;
};

/// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule in reverse.
/// Gradients accumulate; call zero_grad on parameters between steps.
void backward(const Tensor& loss, Tape& tape);

}  // namespace ltm
