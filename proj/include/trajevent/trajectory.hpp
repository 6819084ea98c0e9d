#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace trajevent {

struct PitchSpec {
  double length = 105.0;  // x extent, meters
  double width = 68.0;    // y extent, meters
};

enum class TrackKind { ball, player };

enum class Team { home, away };

// One tracked object. Samples are stored densely, one slot per frame of the
// match; `present[f]` false means the object was not observed at frame f and
// its coordinates are zero.
struct ObjectTrack {
  std::string object_id;
  TrackKind kind = TrackKind::player;
  std::optional<Team> team;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<uint8_t> present;
};

struct MatchTrajectories {
  std::string match_id;
  PitchSpec pitch;
  double fps = 30.0;
  long frame_count = 0;
  bool normalized = false;  // coordinates divided by pitch extents
  std::vector<ObjectTrack> tracks;

  const ObjectTrack& ball() const;
  std::vector<const ObjectTrack*> players() const;
  const ObjectTrack* find_track(const std::string& id) const;
};

enum class EventClass : int { pass = 1, reception = 2, shot = 3 };

constexpr int kNumClasses = 4;  // background + three events
constexpr int kBackground = 0;

const char* event_class_name(EventClass c);
EventClass event_class_from_name(const std::string& name);

// Background is the implicit absence of a label and is never stored.
struct EventLabel {
  long frame = 0;
  EventClass cls = EventClass::pass;

  bool operator==(const EventLabel&) const = default;
};

// K = 0 selects ball-only input; kAllPlayers selects every tracked player.
struct WindowSpec {
  long T = 51;
  long K = 5;
  long center = 0;

  static constexpr long kAllPlayers = -1;
  long half() const { return (T - 1) / 2; }
};

// 2 x T x N slab, channel order (x, y), ball in slot 0. mask[t][n] is false
// where the entry is padding or an absent sample; such entries are exactly 0.
struct WindowTensor {
  long T = 0;
  long N = 0;
  std::vector<double> values;  // [channel][t][n], row-major
  std::vector<uint8_t> mask;   // [t][n]

  double value(int channel, long t, long n) const {
    return values[(static_cast<size_t>(channel) * T + t) * N + n];
  }
  bool valid(long t, long n) const {
    return mask[static_cast<size_t>(t) * N + n] != 0;
  }
};

// Divides coordinates by the pitch extents, clamping tracking noise into
// [0, 1]. Absent samples stay zero. Idempotent.
MatchTrajectories normalize(const MatchTrajectories& match);

// Players ordered by mean ball distance over the window, computed on frames
// where both ball and player are present. Ties break on ascending object_id;
// players absent for the whole window sort last. Returns min(K, available)
// ids. Throws NoBallError when the ball is absent for the entire window.
std::vector<std::string> k_nearest_players(const MatchTrajectories& match,
                                           const WindowSpec& spec);

WindowTensor build_window(const MatchTrajectories& match,
                          const WindowSpec& spec);

// Simulated partial observation from a broadcast-style camera that follows
// the ball: players farther than `radius_m` from the ball are dropped, and
// the ball itself is kept with probability `ball_retention` per frame.
struct OcclusionPolicy {
  double radius_m = 20.0;
  double ball_retention = 1.0;
};

MatchTrajectories occlude(const MatchTrajectories& match,
                          const OcclusionPolicy& policy, uint64_t seed);

void validate_labels(const std::vector<EventLabel>& labels, long frame_count);

}  // namespace trajevent
