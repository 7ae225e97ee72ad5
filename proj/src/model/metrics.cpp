#include "pevade/model/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pevade {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels disagree");
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += y != 0;
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return 0.5;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // rank-sum with average ranks across ties
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0) pos_rank_sum += avg_rank;
    i = j;
  }
  const double u = pos_rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

double log_loss(const std::vector<double>& probs, const std::vector<int>& labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw std::invalid_argument("probs and labels disagree");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    loss -= labels[i] ? std::log(p) : std::log(1.0 - p);
  }
  return loss / static_cast<double>(probs.size());
}

double false_positive_rate(const std::vector<double>& scores, const std::vector<int>& labels,
                           double threshold) {
  std::size_t neg = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0) continue;
    ++neg;
    if (scores[i] >= threshold) ++fp;
  }
  return neg == 0 ? 0.0 : static_cast<double>(fp) / static_cast<double>(neg);
}

}  // namespace pevade
