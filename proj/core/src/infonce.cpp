#include "m3/matching/infonce.hpp"

#include <cmath>

#include "m3/common/error.hpp"

namespace m3 {
namespace {

double desc_dot(const float* a, const float* b, int dim) {
  double s = 0.0;
  for (int c = 0; c < dim; ++c) s += double(a[c]) * b[c];
  return s;
}

}  // namespace

double infonce_loss(const FrameObservation& ref,
                    const std::vector<const FrameObservation*>& others,
                    const std::vector<const CorrespondenceSet*>& gt_matches,
                    const InfoNceConfig& cfg, InfoNceBreakdown* breakdown) {
  if (cfg.tau <= 0.0) {
    fail(ErrorCode::NonPositiveTemperature, "infonce: tau must be positive");
  }
  if (others.empty() || others.size() != gt_matches.size()) {
    fail(ErrorCode::EmptyCorrespondences, "infonce: no frames to contrast");
  }
  if (breakdown) {
    breakdown->match_loss.clear();
    breakdown->qbar.clear();
  }
  const double sign = cfg.negate ? -cfg.tau : cfg.tau;
  const int dim = ref.desc_dim;

  double total = 0.0;
  for (size_t k = 0; k < others.size(); ++k) {
    const FrameObservation& other = *others[k];
    const std::vector<Correspondence>& m = gt_matches[k]->pairs;
    if (m.empty()) {
      fail(ErrorCode::EmptyCorrespondences, "infonce: empty match set");
    }
    const size_t n = m.size();

    // Score matrix over the matched pixels only; row = reference pixel of
    // match i, column = other-frame pixel of match j.
    Eigen::MatrixXd s(n, n);
    for (size_t i = 0; i < n; ++i) {
      const float* di = ref.desc(m[i].qu, m[i].qv);
      for (size_t j = 0; j < n; ++j) {
        s(i, j) = std::exp(
            sign * desc_dot(di, other.desc(m[j].pu, m[j].pv), dim));
      }
    }
    const Eigen::VectorXd row_sum = s.rowwise().sum();
    const Eigen::VectorXd col_sum = s.colwise().sum();

    double loss_k = 0.0;
    double qbar = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double w = std::sqrt(double(ref.Q.at(m[i].qu, m[i].qv)) *
                                 other.Q.at(m[i].pu, m[i].pv));
      qbar += w;
      const double ce = -std::log(s(i, i) / row_sum(i)) -
                        std::log(s(i, i) / col_sum(i));
      loss_k += cfg.weight_per_match ? w * ce : ce;
    }
    qbar /= double(n);
    if (breakdown) {
      breakdown->match_loss.push_back(loss_k);
      breakdown->qbar.push_back(qbar);
    }
    total += qbar * loss_k - cfg.alpha * std::log(qbar);
  }
  return -total / double(others.size());
}

}  // namespace m3
