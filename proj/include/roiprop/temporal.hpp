// Frame and error-frame history.
#pragma once

#include <cstddef>
#include <deque>

#include "roiprop/core.hpp"

namespace roiprop {

/// Fixed-capacity FIFO of images with identical shape, newest last.
template <typename Item>
class Ring {
 public:
  explicit Ring(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorCode::invalid_argument, "ring capacity must be positive");
  }

  void push(Item item) {
    if (!items_.empty() && !items_.front().same_shape(item))
      throw Error(ErrorCode::dimension_mismatch, "ring item shape differs from its contents");
    if constexpr (requires { item.index; }) {
      if (!items_.empty() && item.index <= items_.back().index)
        throw Error(ErrorCode::invalid_argument, "frame indices must increase");
    }
    items_.push_back(std::move(item));
    if (items_.size() > capacity_) items_.pop_front();
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  bool full() const { return items_.size() == capacity_; }
  void clear() { items_.clear(); }

  const Item& operator[](std::size_t i) const { return items_[i]; }
  const Item& newest() const { return items_.back(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::size_t capacity_;
  std::deque<Item> items_;
};

using FrameRing = Ring<Frame>;
using ErrorRing = Ring<ErrorFrame>;

inline ErrorFrame error_frame(const Frame& predicted, const Frame& actual) {
  return absolute_difference(predicted, actual);
}

/// Element-wise mean of the error frames currently held (at most the ring capacity).
inline ErrorFrame momentum_average(const ErrorRing& ring) {
  if (ring.empty()) throw Error(ErrorCode::invalid_argument, "momentum over an empty error ring");
  ErrorFrame out = ring.newest();
  if (ring.size() == 1) return out;
  std::fill(out.data.begin(), out.data.end(), 0.0);
  for (const auto& e : ring)
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += e.data[i];
  const double inv = 1.0 / static_cast<double>(ring.size());
  for (auto& v : out.data) v *= inv;
  return out;
}

}  // namespace roiprop
