#include "pevade/rl/replay.hpp"

#include <numeric>
#include <stdexcept>
#include <utility>

namespace pevade {

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
    next_ = (next_ + 1) % capacity_;
  }
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t count, RandomDraw& rng) const {
  if (count > items_.size()) throw std::invalid_argument("not enough transitions to sample");
  std::vector<std::size_t> idx(items_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<const Transition*> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(&items_[idx[i]]);
  }
  return out;
}

}  // namespace pevade
