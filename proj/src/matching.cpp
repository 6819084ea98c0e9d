#include "trajevent/matching.hpp"

#include <algorithm>
#include <cmath>

#include "trajevent/common.hpp"

namespace trajevent {

MatchingResult match_events(const std::vector<long>& detection_frames,
                            const std::vector<long>& truth_frames,
                            long w_eval) {
  if (w_eval <= 0 || w_eval % 2 == 0)
    throw ContractError("match_events: w_eval must be odd and positive");
  const long half = (w_eval - 1) / 2;

  struct Candidate {
    long delta;
    size_t det;
    size_t truth;
  };
  std::vector<Candidate> candidates;
  for (size_t d = 0; d < detection_frames.size(); ++d) {
    for (size_t g = 0; g < truth_frames.size(); ++g) {
      const long delta = std::labs(detection_frames[d] - truth_frames[g]);
      if (delta <= half) candidates.push_back({delta, d, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) {
              if (a.delta != b.delta) return a.delta < b.delta;
              if (detection_frames[a.det] != detection_frames[b.det])
                return detection_frames[a.det] < detection_frames[b.det];
              return truth_frames[a.truth] < truth_frames[b.truth];
            });

  std::vector<uint8_t> det_used(detection_frames.size(), 0);
  std::vector<uint8_t> truth_used(truth_frames.size(), 0);
  MatchingResult result;
  for (const auto& c : candidates) {
    if (det_used[c.det] || truth_used[c.truth]) continue;
    det_used[c.det] = 1;
    truth_used[c.truth] = 1;
    result.tp.push_back(
        {detection_frames[c.det], truth_frames[c.truth], c.delta});
  }
  for (size_t d = 0; d < detection_frames.size(); ++d)
    if (!det_used[d]) result.fp_frames.push_back(detection_frames[d]);
  for (size_t g = 0; g < truth_frames.size(); ++g)
    if (!truth_used[g]) result.fn_frames.push_back(truth_frames[g]);
  return result;
}

double nearest_rank_percentile(std::vector<double> samples, double p) {
  if (samples.empty())
    throw ContractError("percentile of an empty sample set");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  size_t rank = static_cast<size_t>(std::ceil(p * n));
  rank = std::clamp<size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

ClassMetrics compute_metrics(const MatchingResult& result, double fps) {
  if (fps <= 0.0) throw ContractError("compute_metrics: fps must be positive");
  ClassMetrics m;
  m.tp = static_cast<long>(result.tp.size());
  m.fp = static_cast<long>(result.fp_frames.size());
  m.fn = static_cast<long>(result.fn_frames.size());
  m.precision = m.tp + m.fp > 0
                    ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp)
                    : 0.0;
  m.recall = m.tp + m.fn > 0
                 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn)
                 : 0.0;
  m.f_score = m.precision + m.recall > 0.0
                  ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                  : 0.0;
  if (!result.tp.empty()) {
    std::vector<double> td;
    td.reserve(result.tp.size());
    for (const auto& pair : result.tp)
      td.push_back(static_cast<double>(pair.delta) / fps);
    m.td_p50 = nearest_rank_percentile(td, 0.50);
    m.td_p95 = nearest_rank_percentile(td, 0.95);
  }
  return m;
}

}  // namespace trajevent
