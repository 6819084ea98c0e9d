#include "trajevent/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trajevent/common.hpp"

namespace trajevent {

namespace {

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

Vec2 normalized(const Vec2& v) {
  const double n = v.norm();
  return n > 1e-12 ? Vec2{v.x / n, v.y / n} : Vec2{1.0, 0.0};
}

Vec2 clamp_len(const Vec2& v, double max_len) {
  const double n = v.norm();
  return n > max_len ? v * (max_len / n) : v;
}

struct PlayerSim {
  std::string id;
  Team team;
  Vec2 pos, vel;
  Vec2 anchor;
  Vec2 waypoint;
  long waypoint_until = 0;
};

enum class BallMode { dribble, flight };

}  // namespace

void SimConfig::validate() const {
  if (duration_minutes <= 0.0) throw ConfigError("sim: duration must be positive");
  if (fps <= 0.0) throw ConfigError("sim: fps must be positive");
  if (players_per_team == 0) throw ConfigError("sim: players_per_team must be >= 1");
  if (pitch.length <= 0.0 || pitch.width <= 0.0)
    throw ConfigError("sim: pitch extents must be positive");
  const double speeds[] = {kin.max_player_speed, kin.roam_speed,
                           kin.dribble_speed,    kin.pass_speed_min,
                           kin.pass_speed_max,   kin.shot_speed_min,
                           kin.shot_speed_max,   kin.knock_speed_min,
                           kin.knock_speed_max,  kin.ball_attach_speed};
  for (double s : speeds)
    if (s <= 0.0) throw ConfigError("sim: all speeds must be positive");
  if (kin.control_radius <= 0.0)
    throw ConfigError("sim: control_radius must be positive");
  if (kin.ball_drag <= 0.0) throw ConfigError("sim: ball_drag must be positive");
}

SimMatch generate(const SimConfig& config) {
  config.validate();
  const auto& kin = config.kin;
  const auto& rates = config.rates;
  const double dt = 1.0 / config.fps;
  const long frames =
      static_cast<long>(std::llround(config.duration_minutes * 60.0 * config.fps));
  const double length = config.pitch.length;
  const double width = config.pitch.width;
  // No new kicks near the end of the match so every pass resolves in-match.
  const long quiet_from = frames - static_cast<long>(10.0 * config.fps);
  const long min_flight_frames = static_cast<long>(std::lround(0.4 * config.fps));

  Rng rng(config.seed);

  // Formation anchors in three columns plus a keeper; away side mirrored.
  std::vector<PlayerSim> players;
  const size_t per_team = config.players_per_team;
  for (int side = 0; side < 2; ++side) {
    const Team team = side == 0 ? Team::home : Team::away;
    const char prefix = side == 0 ? 'h' : 'a';
    for (size_t i = 0; i < per_team; ++i) {
      PlayerSim p;
      char buf[24];
      std::snprintf(buf, sizeof(buf), "%c%02u", prefix,
                    static_cast<unsigned>(i));
      p.id = buf;
      p.team = team;
      double xf, yf;
      if (i == 0) {
        xf = 0.06;
        yf = 0.5;
      } else {
        const size_t field = per_team - 1;
        const size_t cols = std::min<size_t>(3, field);
        const size_t col = (i - 1) % cols;
        const size_t row = (i - 1) / cols;
        const size_t rows_in_col = (field + cols - 1 - col) / cols;
        xf = 0.24 + 0.26 * static_cast<double>(col);
        yf = rows_in_col == 1
                 ? 0.5
                 : 0.12 + 0.76 * static_cast<double>(row) /
                              static_cast<double>(rows_in_col - 1);
      }
      if (side == 1) xf = 1.0 - xf;
      p.anchor = {xf * length, yf * width};
      p.pos = {std::clamp(p.anchor.x + rng.uniform(-3.0, 3.0), 1.0, length - 1.0),
               std::clamp(p.anchor.y + rng.uniform(-3.0, 3.0), 1.0, width - 1.0)};
      p.waypoint = p.pos;
      p.waypoint_until = 0;
      players.push_back(std::move(p));
    }
  }
  const size_t n_players = players.size();

  auto goal_center = [&](Team attacking) {
    return attacking == Team::home ? Vec2{length, width / 2.0}
                                   : Vec2{0.0, width / 2.0};
  };

  // Ball state.
  Vec2 ball_pos{length / 2.0, width / 2.0};
  Vec2 ball_vel{0.0, 0.0};
  BallMode mode = BallMode::dribble;
  long kick_frame = 0;
  size_t owner = 0;
  size_t chaser = 0;       // designated recoverer during flight
  bool anyone_recovers = false;
  long dribble_left = 0;

  {
    double best = 1e18;
    for (size_t i = 0; i < n_players; ++i) {
      if (players[i].team != Team::home) continue;
      const double d = (players[i].pos - ball_pos).norm();
      if (d < best) {
        best = d;
        owner = i;
      }
    }
  }

  auto sample_dribble = [&]() {
    const double s = std::clamp(rng.exponential(rates.mean_dribble_seconds),
                                rates.min_dribble_seconds,
                                rates.max_dribble_seconds);
    return static_cast<long>(std::lround(s * config.fps));
  };
  dribble_left = sample_dribble();

  SimMatch out;
  out.labels.reserve(1024);
  out.possession.push_back({players[owner].id, 0});

  // Dense tracks, everything present.
  auto make_track = [&](const std::string& id, TrackKind kind,
                        std::optional<Team> team) {
    ObjectTrack t;
    t.object_id = id;
    t.kind = kind;
    t.team = team;
    t.x.assign(frames, 0.0);
    t.y.assign(frames, 0.0);
    t.present.assign(frames, 1);
    return t;
  };
  ObjectTrack ball_track = make_track("ball", TrackKind::ball, std::nullopt);
  std::vector<ObjectTrack> player_tracks;
  for (const auto& p : players)
    player_tracks.push_back(make_track(p.id, TrackKind::player, p.team));

  auto rest_point = [&](const Vec2& pos, const Vec2& vel) {
    // Exponential drag: total remaining travel is v / drag.
    return pos + vel * (1.0 / kin.ball_drag);
  };

  auto nearest_player = [&](const Vec2& target, std::optional<Team> team,
                            std::optional<size_t> exclude) {
    size_t best_idx = 0;
    double best = 1e18;
    bool found = false;
    for (size_t i = 0; i < n_players; ++i) {
      if (team.has_value() && players[i].team != *team) continue;
      if (exclude.has_value() && i == *exclude) continue;
      const double d = (players[i].pos - target).norm();
      if (d < best) {
        best = d;
        best_idx = i;
        found = true;
      }
    }
    if (!found) throw ContractError("sim: no eligible player");
    return best_idx;
  };

  auto begin_possession = [&](size_t who, long frame) {
    owner = who;
    mode = BallMode::dribble;
    dribble_left = sample_dribble();
    out.possession.push_back({players[who].id, frame});
  };

  for (long f = 0; f < frames; ++f) {
    // Decide kicks first so the velocity change lands on this frame.
    if (mode == BallMode::dribble && --dribble_left <= 0) {
      if (f >= quiet_from) {
        dribble_left = frames;  // hold the ball to the final whistle
      } else {
        PlayerSim& po = players[owner];
        const Vec2 goal = goal_center(po.team);
        const double goal_dist = (goal - po.pos).norm();
        const bool in_range = goal_dist <= kin.shot_range;
        const double action = rng.uniform();
        if (in_range && action < rates.shot_given_range) {
          // Shot: aimed at the goal mouth, fastest kick in the game.
          const double aim_y =
              std::clamp(goal.y + rng.uniform(-3.66, 3.66), 1.0, width - 1.0);
          const Vec2 target{goal.x, aim_y};
          const double speed =
              rng.uniform(kin.shot_speed_min, kin.shot_speed_max);
          ball_vel = normalized(target - ball_pos) * speed;
          mode = BallMode::flight;
          kick_frame = f;
          // The defending side sends its closest player toward the goal.
          const Team defending =
              po.team == Team::home ? Team::away : Team::home;
          chaser = nearest_player(target, defending, std::nullopt);
          anyone_recovers = false;
          out.labels.push_back({f, EventClass::shot});
        } else if (action < rates.shot_given_range + rates.knock_prob ||
                   per_team < 2) {
          // Loose touch: ball squirts ahead, nearest player of either team
          // recovers. No kick label; the pickup is a reception.
          const Vec2 dir = normalized(
              normalized(po.vel.norm() > 0.5 ? po.vel : goal - po.pos) +
              Vec2{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)});
          const double speed =
              rng.uniform(kin.knock_speed_min, kin.knock_speed_max);
          ball_vel = dir * speed;
          mode = BallMode::flight;
          kick_frame = f;
          chaser = nearest_player(rest_point(ball_pos, ball_vel), std::nullopt,
                                  owner);
          anyone_recovers = true;
        } else {
          // Pass to a teammate in a playable band, lead by their movement.
          std::vector<size_t> candidates;
          for (size_t i = 0; i < n_players; ++i) {
            if (i == owner || players[i].team != po.team) continue;
            const double d = (players[i].pos - po.pos).norm();
            if (d >= 6.0 && d <= 40.0) candidates.push_back(i);
          }
          const size_t receiver =
              candidates.empty()
                  ? nearest_player(po.pos, po.team, owner)
                  : candidates[rng.uniform_int(0, candidates.size() - 1)];
          const double speed =
              rng.uniform(kin.pass_speed_min, kin.pass_speed_max);
          const double lead =
              (players[receiver].pos - ball_pos).norm() / speed * 0.8;
          Vec2 aim = players[receiver].pos + players[receiver].vel * lead;
          const bool bad = rng.uniform() < rates.bad_pass_prob;
          if (bad)
            aim = aim + Vec2{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)};
          ball_vel = normalized(aim - ball_pos) * speed;
          mode = BallMode::flight;
          kick_frame = f;
          out.labels.push_back({f, EventClass::pass});
          if (bad) {
            chaser = nearest_player(rest_point(ball_pos, ball_vel),
                                    std::nullopt, owner);
            anyone_recovers = true;
          } else {
            chaser = receiver;
            anyone_recovers = false;
          }
        }
      }
    }

    // Player targets and movement.
    for (size_t i = 0; i < n_players; ++i) {
      PlayerSim& p = players[i];
      Vec2 target;
      double cap;
      if (mode == BallMode::dribble && i == owner) {
        const Vec2 goal = goal_center(p.team);
        target = goal;
        cap = kin.dribble_speed;
      } else if (mode == BallMode::flight && i == chaser) {
        // Meet an approaching ball; otherwise run to where it will stop.
        const Vec2 to_chaser = p.pos - ball_pos;
        const bool approaching =
            ball_vel.x * to_chaser.x + ball_vel.y * to_chaser.y > 0.0;
        target = approaching ? ball_pos : rest_point(ball_pos, ball_vel);
        target.x = std::clamp(target.x, 1.0, length - 1.0);
        target.y = std::clamp(target.y, 1.0, width - 1.0);
        cap = kin.max_player_speed;
      } else {
        if (f >= p.waypoint_until || (p.waypoint - p.pos).norm() < 1.0) {
          p.waypoint = {
              std::clamp(p.anchor.x + rng.uniform(-12.0, 12.0), 2.0, length - 2.0),
              std::clamp(p.anchor.y + rng.uniform(-12.0, 12.0), 2.0, width - 2.0)};
          p.waypoint_until =
              f + static_cast<long>(rng.uniform(2.0, 6.0) * config.fps);
        }
        target = p.waypoint;
        cap = kin.roam_speed;
      }
      const Vec2 to_target = target - p.pos;
      const Vec2 desired =
          to_target.norm() < 0.3 ? Vec2{0.0, 0.0} : normalized(to_target) * cap;
      const double alpha = 1.0 - std::exp(-dt / kin.velocity_relax);
      p.vel = p.vel + (desired - p.vel) * alpha;
      p.vel = clamp_len(p.vel, kin.max_player_speed);
      p.pos = p.pos + p.vel * dt;
      p.pos.x = std::clamp(p.pos.x, 0.0, length);
      p.pos.y = std::clamp(p.pos.y, 0.0, width);
    }

    // Ball movement and recoveries.
    if (mode == BallMode::dribble) {
      const PlayerSim& po = players[owner];
      const Vec2 lead = po.vel.norm() > 0.3 ? normalized(po.vel) * 0.5
                                            : Vec2{0.0, 0.0};
      const Vec2 attach_target = po.pos + lead;
      ball_pos = ball_pos +
                 clamp_len(attach_target - ball_pos, kin.ball_attach_speed * dt);
      ball_vel = po.vel;
    } else {
      ball_pos = ball_pos + ball_vel * dt;
      ball_vel = ball_vel * std::exp(-kin.ball_drag * dt);
      if (ball_pos.x <= 0.0 || ball_pos.x >= length) ball_vel = {0.0, 0.0};
      if (ball_pos.y <= 0.0 || ball_pos.y >= width) ball_vel = {0.0, 0.0};
      ball_pos.x = std::clamp(ball_pos.x, 0.0, length);
      ball_pos.y = std::clamp(ball_pos.y, 0.0, width);

      if (f - kick_frame >= min_flight_frames) {
        size_t who = chaser;
        bool recovered = (players[chaser].pos - ball_pos).norm() <= kin.control_radius;
        if (!recovered && anyone_recovers) {
          // A bystander may reach a loose ball first.
          for (size_t i = 0; i < n_players && !recovered; ++i) {
            if ((players[i].pos - ball_pos).norm() <= kin.control_radius) {
              recovered = true;
              who = i;
            }
          }
        }
        if (recovered) {
          out.labels.push_back({f, EventClass::reception});
          begin_possession(who, f);
        }
      }
    }

    // Record end-of-frame state.
    ball_track.x[f] = ball_pos.x;
    ball_track.y[f] = ball_pos.y;
    for (size_t i = 0; i < n_players; ++i) {
      player_tracks[i].x[f] = players[i].pos.x;
      player_tracks[i].y[f] = players[i].pos.y;
    }
  }

  out.traj.match_id = "sim";
  out.traj.pitch = config.pitch;
  out.traj.fps = config.fps;
  out.traj.frame_count = frames;
  out.traj.tracks.push_back(std::move(ball_track));
  for (auto& t : player_tracks) out.traj.tracks.push_back(std::move(t));

  std::sort(out.labels.begin(), out.labels.end(),
            [](const EventLabel& a, const EventLabel& b) {
              if (a.frame != b.frame) return a.frame < b.frame;
              return static_cast<int>(a.cls) < static_cast<int>(b.cls);
            });
  validate_labels(out.labels, frames);
  return out;
}

MatchSplit train_test_split(size_t match_count, const SplitCounts& counts,
                            uint64_t seed) {
  if (match_count < 3)
    throw ContractError("split: need at least 3 matches, got " +
                        std::to_string(match_count));
  if (counts.train + counts.val + counts.test != match_count)
    throw ContractError("split: counts " + std::to_string(counts.train) + "/" +
                        std::to_string(counts.val) + "/" +
                        std::to_string(counts.test) + " do not sum to " +
                        std::to_string(match_count));
  if (counts.train == 0 || counts.val == 0 || counts.test == 0)
    throw ContractError("split: every split needs at least one match");
  std::vector<size_t> order(match_count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (size_t i = match_count - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(0, i));
    std::swap(order[i], order[j]);
  }
  MatchSplit split;
  size_t at = 0;
  for (size_t i = 0; i < counts.train; ++i) split.train.push_back(order[at++]);
  for (size_t i = 0; i < counts.val; ++i) split.val.push_back(order[at++]);
  for (size_t i = 0; i < counts.test; ++i) split.test.push_back(order[at++]);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

}  // namespace trajevent
