#pragma once

// Reference implementations kept deliberately independent of the library
// code they check: a quadratic rescan NMS, and maximum-cardinality bipartite
// matching via augmenting paths.

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <vector>

namespace testsupport {

struct RefDetection {
  int cls;
  long frame;
  double p;
};

// Greedy NMS by repeated full rescans: take the unsuppressed candidate with
// the highest probability (ties: lowest frame), then mark everything of the
// same class strictly within w_nms frames as suppressed.
inline std::vector<RefDetection> reference_nms(
    const std::vector<std::vector<double>>& rows, long start_frame, int cls,
    double tau, long w_nms) {
  struct Cand {
    long frame;
    double p;
    bool alive;
  };
  std::vector<Cand> cands;
  for (size_t t = 0; t < rows.size(); ++t)
    if (rows[t][cls] >= tau)
      cands.push_back({start_frame + static_cast<long>(t), rows[t][cls], true});
  std::vector<RefDetection> out;
  for (;;) {
    int best = -1;
    for (size_t i = 0; i < cands.size(); ++i) {
      if (!cands[i].alive) continue;
      if (best < 0 || cands[i].p > cands[best].p ||
          (cands[i].p == cands[best].p && cands[i].frame < cands[best].frame))
        best = static_cast<int>(i);
    }
    if (best < 0) break;
    out.push_back({cls, cands[best].frame, cands[best].p});
    for (auto& c : cands)
      if (c.alive && std::labs(c.frame - cands[best].frame) < w_nms)
        c.alive = false;
  }
  std::sort(out.begin(), out.end(),
            [](const RefDetection& a, const RefDetection& b) {
              return a.frame < b.frame;
            });
  return out;
}

// Kuhn's augmenting-path algorithm; edge (d, g) exists when
// |det[d] - truth[g]| <= half_window.
inline int max_bipartite_matching(const std::vector<long>& dets,
                                  const std::vector<long>& truths,
                                  long half_window) {
  const size_t nd = dets.size();
  const size_t ng = truths.size();
  std::vector<int> match_g(ng, -1);
  std::vector<char> visited;

  std::function<bool(size_t)> try_augment = [&](size_t d) -> bool {
    for (size_t g = 0; g < ng; ++g) {
      if (visited[g] || std::labs(dets[d] - truths[g]) > half_window) continue;
      visited[g] = 1;
      if (match_g[g] < 0 || try_augment(static_cast<size_t>(match_g[g]))) {
        match_g[g] = static_cast<int>(d);
        return true;
      }
    }
    return false;
  };

  int matched = 0;
  for (size_t d = 0; d < nd; ++d) {
    visited.assign(ng, 0);
    if (try_augment(d)) ++matched;
  }
  return matched;
}

}  // namespace testsupport
