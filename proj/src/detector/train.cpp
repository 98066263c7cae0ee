#include <algorithm>
#include <cmath>
#include <numeric>

#include "amg/detector/detector.hpp"
#include "amg/random.hpp"

namespace amg::detector {

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> held_out;
};

/// Stratified: each label contributes the same held-out fraction.
Split stratified_split(const std::vector<corpus::CorpusFile>& files, double fraction, std::uint64_t seed) {
  Split split;
  for (auto label : {corpus::Label::Malicious, corpus::Label::Benign}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (files[i].label == label) idx.push_back(i);
    }
    Rng rng(derive_seed(seed, {hash_tag(corpus::to_string(label))}));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
    split.held_out.insert(split.held_out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(held));
    split.train.insert(split.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(held), idx.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.held_out.begin(), split.held_out.end());
  return split;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Split candidates for one feature: midpoints between (quantile-thinned) distinct values.
std::vector<double> candidate_thresholds(std::vector<double> values, int max_bins) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.size() > static_cast<std::size_t>(max_bins) + 1) {
    std::vector<double> thinned;
    for (int k = 0; k <= max_bins; ++k) {
      thinned.push_back(values[static_cast<std::size_t>(k) * (values.size() - 1) / static_cast<std::size_t>(max_bins)]);
    }
    thinned.erase(std::unique(thinned.begin(), thinned.end()), thinned.end());
    values = std::move(thinned);
  }
  std::vector<double> cuts;
  for (std::size_t i = 0; i + 1 < values.size(); ++i) cuts.push_back(0.5 * (values[i] + values[i + 1]));
  return cuts;
}

StumpEnsemble fit_stumps(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainParams& hp) {
  const auto n = x.rows();
  const auto d = x.cols();
  std::vector<std::vector<double>> cuts(static_cast<std::size_t>(d));
  // bins(i, f) = number of cuts strictly below x(i, f), so x <= cuts[j] iff bin <= j
  Eigen::MatrixXi bins(n, d);
  for (Eigen::Index f = 0; f < d; ++f) {
    auto& c = cuts[static_cast<std::size_t>(f)];
    c = candidate_thresholds({x.col(f).data(), x.col(f).data() + n}, hp.max_bins);
    for (Eigen::Index i = 0; i < n; ++i) {
      bins(i, f) = static_cast<int>(std::lower_bound(c.begin(), c.end(), x(i, f)) - c.begin());
    }
  }

  StumpEnsemble model;
  model.learning_rate = hp.learning_rate;
  const double pos = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  model.bias = std::log(pos / (1.0 - pos));
  Eigen::VectorXd score = Eigen::VectorXd::Constant(n, model.bias);

  for (int round = 0; round < hp.rounds; ++round) {
    const Eigen::VectorXd p = score.unaryExpr([](double z) { return sigmoid(z); });
    const Eigen::VectorXd g = p - y;
    const Eigen::VectorXd h = p.cwiseProduct(Eigen::VectorXd::Ones(n) - p).cwiseMax(1e-12);
    const double g_all = g.sum();
    const double h_all = h.sum();
    const double base = g_all * g_all / (h_all + hp.l2);

    double best_gain = 1e-12;
    Stump best;
    bool found = false;
    for (Eigen::Index f = 0; f < d; ++f) {
      const auto& c = cuts[static_cast<std::size_t>(f)];
      if (c.empty()) continue;
      std::vector<double> gs(c.size() + 1, 0.0), hs(c.size() + 1, 0.0);
      for (Eigen::Index i = 0; i < n; ++i) {
        gs[static_cast<std::size_t>(bins(i, f))] += g[i];
        hs[static_cast<std::size_t>(bins(i, f))] += h[i];
      }
      double gl = 0.0, hl = 0.0;
      for (std::size_t j = 0; j < c.size(); ++j) {
        gl += gs[j];
        hl += hs[j];
        const double gr = g_all - gl, hr = h_all - hl;
        const double gain = gl * gl / (hl + hp.l2) + gr * gr / (hr + hp.l2) - base;
        if (gain > best_gain) {  // strict: earliest feature and cut win ties
          best_gain = gain;
          best = {static_cast<int>(f), c[j], -gl / (hl + hp.l2) * hp.learning_rate,
                  -gr / (hr + hp.l2) * hp.learning_rate};
          found = true;
        }
      }
    }
    if (!found) break;
    model.stumps.push_back(best);
    for (Eigen::Index i = 0; i < n; ++i) score[i] += x(i, best.feature) <= best.threshold ? best.left : best.right;
  }
  return model;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainParams& hp) {
  const auto n = static_cast<double>(x.rows());
  LogisticModel m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - m.mean.transpose();
  const Eigen::VectorXd sd = (centered.array().square().colwise().sum() / n).sqrt().transpose();
  m.inv_scale = sd.unaryExpr([](double s) { return s > 1e-12 ? 1.0 / s : 0.0; });
  const Eigen::MatrixXd z = centered * m.inv_scale.asDiagonal();

  // Full-batch Adam on the mean log-loss plus weight decay.
  m.weights = Eigen::VectorXd::Zero(x.cols());
  m.bias = 0.0;
  Eigen::VectorXd mw = Eigen::VectorXd::Zero(x.cols()), vw = mw;
  double mb = 0.0, vb = 0.0;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int t = 1; t <= hp.epochs; ++t) {
    const Eigen::VectorXd p = ((z * m.weights).array() + m.bias).unaryExpr([](double v) { return sigmoid(v); });
    const Eigen::VectorXd r = p - y;
    const Eigen::VectorXd gw = z.transpose() * r / n + hp.weight_decay * m.weights;
    const double gb = r.mean();
    mw = b1 * mw + (1 - b1) * gw;
    vw = b2 * vw + (1 - b2) * gw.cwiseProduct(gw);
    mb = b1 * mb + (1 - b1) * gb;
    vb = b2 * vb + (1 - b2) * gb * gb;
    const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
    m.weights -= (hp.step * (mw / c1).array() / ((vw / c2).array().sqrt() + eps)).matrix();
    m.bias -= hp.step * (mb / c1) / (std::sqrt(vb / c2) + eps);
  }
  return m;
}

}  // namespace

Detector train_detector(const std::vector<corpus::CorpusFile>& files, DetectorKind which, const TrainParams& hyper,
                        std::uint64_t seed) {
  const auto malicious = std::count_if(files.begin(), files.end(),
                                       [](const auto& f) { return f.label == corpus::Label::Malicious; });
  const auto benign = static_cast<std::ptrdiff_t>(files.size()) - malicious;
  if (malicious < 2 || benign < 2) throw DegenerateCorpus("detector training needs both labels");
  if (!(hyper.held_out_fraction > 0.0 && hyper.held_out_fraction < 1.0)) {
    throw std::invalid_argument("held_out_fraction must be in (0,1)");
  }

  const auto split = stratified_split(files, hyper.held_out_fraction, seed);
  const int dim = which == DetectorKind::A ? kFeaturesA : kFeaturesB;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(split.train.size()), dim);
  Eigen::VectorXd y(static_cast<Eigen::Index>(split.train.size()));
  for (std::size_t r = 0; r < split.train.size(); ++r) {
    const auto& f = files[split.train[r]];
    const auto row = static_cast<Eigen::Index>(r);
    if (which == DetectorKind::A) {
      x.row(row) = extract_features_a(f.bytes).transpose();
    } else {
      x.row(row) = extract_features_b(f.bytes).cwiseSqrt().transpose();
    }
    y[row] = f.label == corpus::Label::Malicious ? 1.0 : 0.0;
  }

  auto model = which == DetectorKind::A ? std::variant<StumpEnsemble, LogisticModel>(fit_stumps(x, y, hyper))
                                        : std::variant<StumpEnsemble, LogisticModel>(fit_logistic(x, y, hyper));
  const Detector provisional(which, model, 0.0);
  std::vector<corpus::CorpusFile> held;
  for (auto i : split.held_out) held.push_back(files[i]);
  return Detector(which, std::move(model), held.empty() ? 0.0 : accuracy(provisional, held));
}

}  // namespace amg::detector
