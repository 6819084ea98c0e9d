#include "trajevent/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trajevent/common.hpp"

namespace trajevent {

const ObjectTrack& MatchTrajectories::ball() const {
  for (const auto& t : tracks)
    if (t.kind == TrackKind::ball) return t;
  throw DataError("match '" + match_id + "' has no ball track");
}

std::vector<const ObjectTrack*> MatchTrajectories::players() const {
  std::vector<const ObjectTrack*> out;
  for (const auto& t : tracks)
    if (t.kind == TrackKind::player) out.push_back(&t);
  return out;
}

const ObjectTrack* MatchTrajectories::find_track(const std::string& id) const {
  for (const auto& t : tracks)
    if (t.object_id == id) return &t;
  return nullptr;
}

const char* event_class_name(EventClass c) {
  switch (c) {
    case EventClass::pass:
      return "pass";
    case EventClass::reception:
      return "reception";
    case EventClass::shot:
      return "shot";
  }
  throw ContractError("unknown event class");
}

EventClass event_class_from_name(const std::string& name) {
  if (name == "pass") return EventClass::pass;
  if (name == "reception") return EventClass::reception;
  if (name == "shot") return EventClass::shot;
  throw DataError("unknown event class '" + name + "'");
}

MatchTrajectories normalize(const MatchTrajectories& match) {
  if (match.normalized) return match;
  if (match.pitch.length <= 0.0 || match.pitch.width <= 0.0)
    throw ContractError("normalize: pitch extents must be positive");
  MatchTrajectories out = match;
  out.normalized = true;
  for (auto& trk : out.tracks) {
    for (size_t f = 0; f < trk.present.size(); ++f) {
      if (!trk.present[f]) {
        trk.x[f] = 0.0;
        trk.y[f] = 0.0;
        continue;
      }
      trk.x[f] = std::clamp(trk.x[f] / match.pitch.length, 0.0, 1.0);
      trk.y[f] = std::clamp(trk.y[f] / match.pitch.width, 0.0, 1.0);
    }
  }
  return out;
}

std::vector<std::string> k_nearest_players(const MatchTrajectories& match,
                                           const WindowSpec& spec) {
  const ObjectTrack& ball = match.ball();
  const long lo = std::max<long>(0, spec.center - spec.half());
  const long hi = std::min<long>(match.frame_count - 1, spec.center + spec.half());
  if (lo > hi)
    throw ContractError("k_nearest_players: window does not intersect match");

  bool ball_seen = false;
  for (long f = lo; f <= hi; ++f)
    if (ball.present[f]) {
      ball_seen = true;
      break;
    }
  if (!ball_seen)
    throw NoBallError("ball absent for every frame of window centered at " +
                      std::to_string(spec.center));

  struct Ranked {
    double mean_dist;
    const ObjectTrack* track;
  };
  std::vector<Ranked> ranked;
  for (const ObjectTrack* p : match.players()) {
    double sum = 0.0;
    long n = 0;
    for (long f = lo; f <= hi; ++f) {
      if (!ball.present[f] || !p->present[f]) continue;
      const double dx = ball.x[f] - p->x[f];
      const double dy = ball.y[f] - p->y[f];
      sum += std::sqrt(dx * dx + dy * dy);
      ++n;
    }
    const double mean =
        n > 0 ? sum / static_cast<double>(n)
              : std::numeric_limits<double>::infinity();
    ranked.push_back({mean, p});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.mean_dist != b.mean_dist) return a.mean_dist < b.mean_dist;
    return a.track->object_id < b.track->object_id;
  });

  const size_t want = spec.K == WindowSpec::kAllPlayers
                          ? ranked.size()
                          : std::min<size_t>(ranked.size(), spec.K);
  std::vector<std::string> ids;
  ids.reserve(want);
  for (size_t i = 0; i < want; ++i) ids.push_back(ranked[i].track->object_id);
  return ids;
}

WindowTensor build_window(const MatchTrajectories& match,
                          const WindowSpec& spec) {
  if (spec.T <= 0 || spec.T % 2 == 0)
    throw ContractError("build_window: T must be odd and positive, got " +
                        std::to_string(spec.T));
  if (spec.center < 0 || spec.center >= match.frame_count)
    throw ContractError("build_window: center " + std::to_string(spec.center) +
                        " outside [0, " + std::to_string(match.frame_count) +
                        ")");
  if (!match.normalized)
    throw ContractError("build_window: match must be normalized first");
  const std::vector<std::string> ids = k_nearest_players(match, spec);

  long n_players = spec.K == WindowSpec::kAllPlayers
                       ? static_cast<long>(match.players().size())
                       : spec.K;
  WindowTensor w;
  w.T = spec.T;
  w.N = 1 + n_players;
  w.values.assign(static_cast<size_t>(2) * w.T * w.N, 0.0);
  w.mask.assign(static_cast<size_t>(w.T) * w.N, 0);

  std::vector<const ObjectTrack*> slots(w.N, nullptr);
  slots[0] = &match.ball();
  for (size_t i = 0; i < ids.size(); ++i)
    slots[i + 1] = match.find_track(ids[i]);

  const long first = spec.center - spec.half();
  for (long n = 0; n < w.N; ++n) {
    const ObjectTrack* trk = slots[n];
    if (trk == nullptr) continue;  // fewer players than K: stays zero-padded
    for (long t = 0; t < w.T; ++t) {
      const long f = first + t;
      if (f < 0 || f >= match.frame_count || !trk->present[f]) continue;
      w.values[(0 * w.T + t) * w.N + n] = trk->x[f];
      w.values[(1 * w.T + t) * w.N + n] = trk->y[f];
      w.mask[static_cast<size_t>(t) * w.N + n] = 1;
    }
  }
  return w;
}

MatchTrajectories occlude(const MatchTrajectories& match,
                          const OcclusionPolicy& policy, uint64_t seed) {
  MatchTrajectories out = match;
  Rng rng(seed);
  ObjectTrack* ball = nullptr;
  for (auto& t : out.tracks)
    if (t.kind == TrackKind::ball) ball = &t;
  if (ball == nullptr) throw DataError("occlude: match has no ball track");

  // Camera anchor: the ball when visible, otherwise its last known spot.
  const ObjectTrack& true_ball = match.ball();
  double anchor_x = match.pitch.length / 2.0;
  double anchor_y = match.pitch.width / 2.0;
  for (long f = 0; f < out.frame_count; ++f) {
    // Ball retention draw happens every frame so the stream position does
    // not depend on the policy.
    const bool keep_ball = rng.uniform() < policy.ball_retention;
    if (true_ball.present[f]) {
      anchor_x = true_ball.x[f];
      anchor_y = true_ball.y[f];
      if (!keep_ball) {
        ball->present[f] = 0;
        ball->x[f] = 0.0;
        ball->y[f] = 0.0;
      }
    }
    for (auto& trk : out.tracks) {
      if (trk.kind != TrackKind::player || !trk.present[f]) continue;
      const double dx = trk.x[f] - anchor_x;
      const double dy = trk.y[f] - anchor_y;
      if (std::sqrt(dx * dx + dy * dy) > policy.radius_m) {
        trk.present[f] = 0;
        trk.x[f] = 0.0;
        trk.y[f] = 0.0;
      }
    }
  }
  return out;
}

void validate_labels(const std::vector<EventLabel>& labels, long frame_count) {
  for (const auto& l : labels) {
    if (l.frame < 0 || l.frame >= frame_count)
      throw DataError("label frame " + std::to_string(l.frame) +
                      " outside [0, " + std::to_string(frame_count) + ")");
  }
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i - 1].frame > labels[i].frame)
      throw ContractError("labels must be sorted by frame");
    if (labels[i - 1] == labels[i])
      throw DataError("duplicate label (" + std::to_string(labels[i].frame) +
                      ", " + event_class_name(labels[i].cls) + ")");
  }
}

}  // namespace trajevent
