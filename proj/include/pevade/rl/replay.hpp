#pragma once

#include <cstddef>
#include <vector>

#include "pevade/rl/qnet.hpp"
#include "pevade/util/rng.hpp"

namespace pevade {

// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_[i]; }

  // Uniform draw of `count` distinct transitions (count <= size()).
  std::vector<const Transition*> sample(std::size_t count, RandomDraw& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

}  // namespace pevade
