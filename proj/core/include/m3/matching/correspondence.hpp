#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "m3/prior/observation.hpp"

namespace m3 {

// A pixel-to-pixel match: q = (qu, qv) in the source frame, p = (pu, pv) in
// the target frame. `sim` is the descriptor dot product (recomputable from
// the two frames), `weight` is sqrt(Q_src(q) * Q_tgt(p)).
struct Correspondence {
  int qu = 0, qv = 0;
  int pu = 0, pv = 0;
  double sim = 0.0;
  double weight = 0.0;
};

struct MatchStats {
  int64_t candidates_evaluated = 0;  // descriptor dots computed
  int source_valid = 0;              // valid source pixels considered
  int dropped_behind_camera = 0;
  int dropped_outside_image = 0;     // projected beyond the search reach
  int dropped_low_similarity = 0;
};

// Matches from one source frame into one target frame. Each source pixel
// appears at most once.
struct CorrespondenceSet {
  uint64_t source_id = 0;
  uint64_t target_id = 0;
  std::vector<Correspondence> pairs;
  MatchStats stats;
};

// CSV export with header "qu,qv,pu,pv,sim,weight". The reader recovers the
// pairs (ids and statistics are not part of the table).
void write_correspondence_csv(std::ostream& out, const CorrespondenceSet& set);
CorrespondenceSet read_correspondence_csv(std::istream& in);

}  // namespace m3
