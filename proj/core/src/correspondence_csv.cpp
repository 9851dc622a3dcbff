#include "m3/matching/correspondence.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "m3/common/error.hpp"

namespace m3 {

void write_correspondence_csv(std::ostream& out, const CorrespondenceSet& set) {
  out << "qu,qv,pu,pv,sim,weight\n";
  char line[160];
  for (const Correspondence& c : set.pairs) {
    std::snprintf(line, sizeof(line), "%d,%d,%d,%d,%.9g,%.9g\n", c.qu, c.qv,
                  c.pu, c.pv, c.sim, c.weight);
    out << line;
  }
}

CorrespondenceSet read_correspondence_csv(std::istream& in) {
  CorrespondenceSet set;
  std::string line;
  if (!std::getline(in, line) || line != "qu,qv,pu,pv,sim,weight") {
    fail(ErrorCode::BadMagic, "correspondence csv: missing header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Correspondence c;
    if (std::sscanf(line.c_str(), "%d,%d,%d,%d,%lf,%lf", &c.qu, &c.qv, &c.pu,
                    &c.pv, &c.sim, &c.weight) != 6) {
      fail(ErrorCode::TruncatedFile, "correspondence csv: bad row: " + line);
    }
    set.pairs.push_back(c);
  }
  return set;
}

}  // namespace m3
