#include "pevade/model/gbdt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace pevade {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double Tree::predict(const double* x) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(i)];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

// Quantile split candidates for one feature: strictly increasing midpoints
// between adjacent distinct values, at most max_bins - 1 of them.
std::vector<double> make_edges(const double* col, Eigen::Index n, int max_bins) {
  std::vector<double> sorted(col, col + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> uniq;
  for (double v : sorted)
    if (uniq.empty() || v != uniq.back()) uniq.push_back(v);
  if (uniq.size() < 2) return {};

  std::vector<double> edges;
  const std::size_t max_edges = static_cast<std::size_t>(max_bins) - 1;
  if (uniq.size() - 1 <= max_edges) {
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) edges.push_back((uniq[i] + uniq[i + 1]) / 2.0);
    return edges;
  }
  for (std::size_t j = 1; j <= max_edges; ++j) {
    const double v = sorted[j * static_cast<std::size_t>(n) / (max_edges + 1)];
    const auto it = std::lower_bound(uniq.begin(), uniq.end(), v);
    if (it == uniq.begin()) continue;
    const double edge = (*(it - 1) + v) / 2.0;
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

struct BuildContext {
  const std::vector<std::uint8_t>& codes;  // feature-major, codes[f * n + i]
  Eigen::Index n;
  Eigen::Index features;
  const std::vector<std::vector<double>>& edges;
  const std::vector<double>& grad;
  const std::vector<double>& hess;
  const GbdtParams& params;
};

double leaf_value(double g, double h, const GbdtParams& p) {
  return std::clamp(-g / (h + p.lambda), -p.leaf_clamp, p.leaf_clamp);
}

int build_node(const BuildContext& ctx, std::vector<Eigen::Index>& idx, int depth, Tree& tree) {
  double total_g = 0.0, total_h = 0.0;
  for (auto i : idx) {
    total_g += ctx.grad[static_cast<std::size_t>(i)];
    total_h += ctx.hess[static_cast<std::size_t>(i)];
  }

  const auto make_leaf = [&]() {
    tree.nodes.push_back({-1, 0.0, -1, -1, leaf_value(total_g, total_h, ctx.params)});
    return static_cast<int>(tree.nodes.size()) - 1;
  };
  if (depth >= ctx.params.max_depth || idx.size() < 2) return make_leaf();

  const double parent_obj = total_g * total_g / (total_h + ctx.params.lambda);
  double best_gain = 1e-12;
  int best_feature = -1;
  int best_bin = -1;

  std::array<double, 256> gb{}, hb{};
  std::array<std::uint32_t, 256> cb{};
  for (Eigen::Index f = 0; f < ctx.features; ++f) {
    const auto& edges = ctx.edges[static_cast<std::size_t>(f)];
    if (edges.empty()) continue;
    const std::size_t nbins = edges.size() + 1;
    std::fill(gb.begin(), gb.begin() + static_cast<std::ptrdiff_t>(nbins), 0.0);
    std::fill(hb.begin(), hb.begin() + static_cast<std::ptrdiff_t>(nbins), 0.0);
    std::fill(cb.begin(), cb.begin() + static_cast<std::ptrdiff_t>(nbins), 0u);
    const std::uint8_t* col = ctx.codes.data() + static_cast<std::size_t>(f) * ctx.n;
    for (auto i : idx) {
      const std::uint8_t c = col[i];
      gb[c] += ctx.grad[static_cast<std::size_t>(i)];
      hb[c] += ctx.hess[static_cast<std::size_t>(i)];
      ++cb[c];
    }
    double gl = 0.0, hl = 0.0;
    std::uint32_t cl = 0;
    for (std::size_t b = 0; b + 1 < nbins; ++b) {
      gl += gb[b];
      hl += hb[b];
      cl += cb[b];
      if (cl == 0 || cl == idx.size()) continue;
      const double gr = total_g - gl, hr = total_h - hl;
      const double gain = gl * gl / (hl + ctx.params.lambda) + gr * gr / (hr + ctx.params.lambda) -
                          parent_obj;
      if (gain > best_gain) {
        best_gain = gain;
        best_feature = static_cast<int>(f);
        best_bin = static_cast<int>(b);
      }
    }
  }
  if (best_feature < 0) return make_leaf();

  std::vector<Eigen::Index> left_idx, right_idx;
  const std::uint8_t* col = ctx.codes.data() + static_cast<std::size_t>(best_feature) * ctx.n;
  for (auto i : idx)
    (col[i] <= best_bin ? left_idx : right_idx).push_back(i);
  idx.clear();
  idx.shrink_to_fit();

  const int self = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({best_feature,
                        ctx.edges[static_cast<std::size_t>(best_feature)][static_cast<std::size_t>(best_bin)],
                        -1, -1, 0.0});
  const int left = build_node(ctx, left_idx, depth + 1, tree);
  const int right = build_node(ctx, right_idx, depth + 1, tree);
  tree.nodes[static_cast<std::size_t>(self)].left = left;
  tree.nodes[static_cast<std::size_t>(self)].right = right;
  return self;
}

}  // namespace

GbdtModel GbdtModel::train(const Eigen::MatrixXd& x, const std::vector<int>& y,
                           const GbdtParams& params, std::vector<double>* round_losses) {
  const Eigen::Index n = x.rows();
  const Eigen::Index features = x.cols();
  if (n < 2 || static_cast<std::size_t>(n) != y.size())
    throw std::invalid_argument("training data needs >= 2 labeled rows");
  if (std::count(y.begin(), y.end(), 0) == 0 ||
      static_cast<std::size_t>(std::count(y.begin(), y.end(), 0)) == y.size())
    throw DegenerateDataError("training labels are all one class");

  GbdtModel model;
  model.feature_dim_ = static_cast<std::size_t>(features);
  model.learning_rate_ = params.learning_rate;

  double mean = 0.0;
  for (int label : y) mean += label;
  mean = std::clamp(mean / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  model.base_score_ = std::log(mean / (1.0 - mean));

  std::vector<std::vector<double>> edges(static_cast<std::size_t>(features));
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(features) * static_cast<std::size_t>(n));
  for (Eigen::Index f = 0; f < features; ++f) {
    edges[static_cast<std::size_t>(f)] = make_edges(x.col(f).data(), n, params.max_bins);
    const auto& e = edges[static_cast<std::size_t>(f)];
    std::uint8_t* col = codes.data() + static_cast<std::size_t>(f) * static_cast<std::size_t>(n);
    for (Eigen::Index i = 0; i < n; ++i)
      col[i] = static_cast<std::uint8_t>(std::lower_bound(e.begin(), e.end(), x(i, f)) - e.begin());
  }

  // Row-major copy so per-sample prediction reads contiguous memory.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x;

  std::vector<double> margin(static_cast<std::size_t>(n), model.base_score_);
  std::vector<double> grad(static_cast<std::size_t>(n)), hess(static_cast<std::size_t>(n));
  if (round_losses) round_losses->clear();

  for (int round = 0; round < params.rounds; ++round) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = logistic(margin[static_cast<std::size_t>(i)]);
      grad[static_cast<std::size_t>(i)] = p - y[static_cast<std::size_t>(i)];
      hess[static_cast<std::size_t>(i)] = p * (1.0 - p);
    }
    Tree tree;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    const BuildContext ctx{codes, n, features, edges, grad, hess, params};
    build_node(ctx, idx, 0, tree);

    for (Eigen::Index i = 0; i < n; ++i)
      margin[static_cast<std::size_t>(i)] += params.learning_rate * tree.predict(xr.row(i).data());
    model.trees_.push_back(std::move(tree));

    if (round_losses) {
      double loss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double p = std::clamp(logistic(margin[static_cast<std::size_t>(i)]), 1e-12, 1.0 - 1e-12);
        loss -= y[static_cast<std::size_t>(i)] ? std::log(p) : std::log(1.0 - p);
      }
      round_losses->push_back(loss / static_cast<double>(n));
    }
  }
  return model;
}

double GbdtModel::score(const Eigen::VectorXd& features) const {
  if (feature_dim_ != 0 && static_cast<std::size_t>(features.size()) != feature_dim_)
    throw DimensionMismatchError("feature vector length does not match the model");
  return score(features.data());
}

double GbdtModel::score(const double* features) const {
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(features);
  return logistic(base_score_ + learning_rate_ * sum);
}

double GbdtModel::calibrate_threshold(std::vector<double> scores, const std::vector<int>& labels,
                                      double max_fpr) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("calibration scores and labels disagree");
  std::vector<double> benign;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (labels[i] == 0) benign.push_back(scores[i]);
  if (benign.empty() || benign.size() == scores.size())
    throw DegenerateDataError("calibration data is all one class");

  std::sort(benign.begin(), benign.end());
  std::sort(scores.begin(), scores.end());
  const auto benign_n = static_cast<double>(benign.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i > 0 && scores[i] == scores[i - 1]) continue;
    const auto above = benign.end() - std::lower_bound(benign.begin(), benign.end(), scores[i]);
    if (static_cast<double>(above) / benign_n <= max_fpr) return scores[i];
  }
  return std::nextafter(scores.back(), std::numeric_limits<double>::infinity());
}

nlohmann::json GbdtModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes)
      nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}, {"v", n.value}});
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"format", "pevade-gbdt"},
          {"version", 1},
          {"feature_dim", feature_dim_},
          {"base_score", base_score_},
          {"learning_rate", learning_rate_},
          {"threshold", threshold_},
          {"trees", std::move(trees)}};
}

GbdtModel GbdtModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "pevade-gbdt") throw std::runtime_error("not a model file");
  if (j.value("version", 0) != 1) throw std::runtime_error("unsupported model version");
  GbdtModel model;
  model.feature_dim_ = j.at("feature_dim").get<std::size_t>();
  model.base_score_ = j.at("base_score").get<double>();
  model.learning_rate_ = j.at("learning_rate").get<double>();
  model.threshold_ = j.at("threshold").get<double>();
  for (const auto& tj : j.at("trees")) {
    Tree tree;
    for (const auto& nj : tj.at("nodes"))
      tree.nodes.push_back({nj.at("f").get<int>(), nj.at("t").get<double>(), nj.at("l").get<int>(),
                            nj.at("r").get<int>(), nj.at("v").get<double>()});
    model.trees_.push_back(std::move(tree));
  }
  return model;
}

void GbdtModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << to_json().dump(2) << "\n";
}

GbdtModel GbdtModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

}  // namespace pevade
