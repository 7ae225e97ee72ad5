#pragma once

#include <vector>

namespace pevade {

// Area under the ROC curve with average-rank tie handling. Returns 0.5 when
// either class is absent.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Mean binary cross-entropy; probabilities are clamped away from {0, 1}.
double log_loss(const std::vector<double>& probs, const std::vector<int>& labels);

// Fraction of label-0 samples scoring at or above the threshold.
double false_positive_rate(const std::vector<double>& scores, const std::vector<int>& labels,
                           double threshold);

}  // namespace pevade
