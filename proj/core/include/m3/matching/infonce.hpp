#pragma once

#include "m3/matching/correspondence.hpp"

namespace m3 {

struct InfoNceConfig {
  double tau = 0.07;   // temperature; must be positive
  double alpha = 10.0; // confidence regularizer strength
  // Candidate score s(d1, dk) = exp(-tau * <d1, dk>) as specified; setting
  // negate = false flips the exponent sign (kept switchable because the
  // printed sign makes similar descriptors score LOW).
  bool negate = true;
  // Weight each match's cross-entropy by its pair confidence instead of
  // uniformly.
  bool weight_per_match = false;
};

// Symmetric contrastive descriptor loss for one reference frame against the
// other frames of a batch. For each other frame k with mined ground-truth
// matches M_k, candidates are restricted to the matched pixels themselves:
//
//   L_k = sum_{(q,p) in M_k}  -log( s(q,p) / sum_{p' in P_k} s(q,p') )
//                             -log( s(q,p) / sum_{q' in P_1} s(q',p) )
//
// with P_1 / P_k the matched reference / other pixels. The total is
//
//   -(1/(N-1)) * sum_k ( Qbar_k * L_k - alpha * log(Qbar_k) )
//
// where Qbar_k is the mean pair confidence sqrt(Q_1(q) * Q_k(p)) over M_k.
// A single-pair M_k contributes zero match loss; identical descriptors
// everywhere make L_k = 2 |M_k| log |M_k|. Throws NonPositiveTemperature for
// tau <= 0 and EmptyCorrespondences when there are no other frames or some
// M_k is empty.
struct InfoNceBreakdown {
  std::vector<double> match_loss;  // L_k per contrasted frame
  std::vector<double> qbar;        // mean pair confidence per frame
};

double infonce_loss(const FrameObservation& ref,
                    const std::vector<const FrameObservation*>& others,
                    const std::vector<const CorrespondenceSet*>& gt_matches,
                    const InfoNceConfig& cfg,
                    InfoNceBreakdown* breakdown = nullptr);

}  // namespace m3
