#include "trajevent/trajectory_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "trajevent/common.hpp"

namespace trajevent {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::filesystem::path& file, size_t line,
                             const std::string& what) {
  throw DataError(file.string() + ":" + std::to_string(line) + ": " + what);
}

double json_finite(const json& j, const char* key,
                   const std::filesystem::path& file, size_t line) {
  if (!j.contains(key) || !j[key].is_number())
    parse_fail(file, line, std::string("missing or non-numeric '") + key + "'");
  const double v = j[key].get<double>();
  if (!std::isfinite(v))
    parse_fail(file, line, std::string("non-finite value for '") + key + "'");
  return v;
}

struct RawTrack {
  TrackKind kind = TrackKind::player;
  std::optional<Team> team;
  std::vector<long> frames;
  std::vector<double> xs, ys;
};

}  // namespace

MatchTrajectories load_trajectories(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open trajectory file " + file.string());

  MatchTrajectories match;
  match.match_id = file.stem().string();

  std::string line;
  size_t line_no = 0;
  long header_frame_count = -1;
  long max_frame = -1;
  std::map<std::string, RawTrack> raw;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      parse_fail(file, line_no, e.what());
    }
    if (!j.is_object()) parse_fail(file, line_no, "expected a JSON object");

    if (line_no == 1 && !j.contains("id")) {
      if (j.contains("pitch_length"))
        match.pitch.length = json_finite(j, "pitch_length", file, line_no);
      if (j.contains("pitch_width"))
        match.pitch.width = json_finite(j, "pitch_width", file, line_no);
      if (j.contains("fps")) match.fps = json_finite(j, "fps", file, line_no);
      if (j.contains("frame_count")) {
        if (!j["frame_count"].is_number_integer())
          parse_fail(file, line_no, "frame_count must be an integer");
        header_frame_count = j["frame_count"].get<long>();
      }
      if (match.pitch.length <= 0 || match.pitch.width <= 0 || match.fps <= 0)
        parse_fail(file, line_no, "pitch extents and fps must be positive");
      if (j.contains("frame_count") && header_frame_count <= 0)
        parse_fail(file, line_no, "frame_count must be positive");
      continue;
    }

    if (!j.contains("frame") || !j["frame"].is_number_integer())
      parse_fail(file, line_no, "missing or non-integer 'frame'");
    const long frame = j["frame"].get<long>();
    if (frame < 0) parse_fail(file, line_no, "negative frame index");
    if (header_frame_count >= 0 && frame >= header_frame_count)
      parse_fail(file, line_no,
                 "frame " + std::to_string(frame) + " >= frame_count " +
                     std::to_string(header_frame_count));
    if (!j.contains("id") || !j["id"].is_string())
      parse_fail(file, line_no, "missing or non-string 'id'");
    const std::string id = j["id"].get<std::string>();
    if (!j.contains("kind") || !j["kind"].is_string())
      parse_fail(file, line_no, "missing or non-string 'kind'");
    const std::string kind_s = j["kind"].get<std::string>();
    TrackKind kind;
    if (kind_s == "ball")
      kind = TrackKind::ball;
    else if (kind_s == "player")
      kind = TrackKind::player;
    else
      parse_fail(file, line_no, "kind must be 'ball' or 'player'");
    std::optional<Team> team;
    if (j.contains("team") && !j["team"].is_null()) {
      if (!j["team"].is_string())
        parse_fail(file, line_no, "team must be 'home', 'away' or null");
      const std::string team_s = j["team"].get<std::string>();
      if (team_s == "home")
        team = Team::home;
      else if (team_s == "away")
        team = Team::away;
      else
        parse_fail(file, line_no, "team must be 'home', 'away' or null");
    }
    const double x = json_finite(j, "x", file, line_no);
    const double y = json_finite(j, "y", file, line_no);

    RawTrack& trk = raw[id];
    if (trk.frames.empty()) {
      trk.kind = kind;
      trk.team = team;
    } else {
      if (trk.kind != kind)
        parse_fail(file, line_no, "object '" + id + "' changes kind");
      if (!trk.frames.empty() && trk.frames.back() >= frame)
        parse_fail(file, line_no,
                   "frames for object '" + id + "' must be strictly increasing");
    }
    trk.frames.push_back(frame);
    trk.xs.push_back(x);
    trk.ys.push_back(y);
    max_frame = std::max(max_frame, frame);
  }

  if (raw.empty()) throw DataError("trajectory file " + file.string() + " has no records");
  match.frame_count = header_frame_count >= 0 ? header_frame_count : max_frame + 1;

  size_t ball_tracks = 0;
  for (const auto& [id, trk] : raw)
    if (trk.kind == TrackKind::ball) ++ball_tracks;
  if (ball_tracks != 1)
    throw DataError("trajectory file " + file.string() + " must contain exactly one ball track, found " +
                    std::to_string(ball_tracks));

  // Canonical order: ball first, then players by ascending id.
  auto densify = [&](const std::string& id, const RawTrack& src) {
    ObjectTrack t;
    t.object_id = id;
    t.kind = src.kind;
    t.team = src.team;
    t.x.assign(match.frame_count, 0.0);
    t.y.assign(match.frame_count, 0.0);
    t.present.assign(match.frame_count, 0);
    for (size_t i = 0; i < src.frames.size(); ++i) {
      const long f = src.frames[i];
      t.x[f] = src.xs[i];
      t.y[f] = src.ys[i];
      t.present[f] = 1;
    }
    match.tracks.push_back(std::move(t));
  };
  for (const auto& [id, trk] : raw)
    if (trk.kind == TrackKind::ball) densify(id, trk);
  for (const auto& [id, trk] : raw)
    if (trk.kind == TrackKind::player) densify(id, trk);

  return match;
}

std::vector<EventLabel> load_labels(const std::filesystem::path& file,
                                    long frame_count) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open label file " + file.string());
  std::string line;
  size_t line_no = 0;
  std::vector<EventLabel> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "frame,class")
        parse_fail(file, line_no, "expected header 'frame,class'");
      continue;
    }
    const size_t comma = line.find(',');
    if (comma == std::string::npos)
      parse_fail(file, line_no, "expected 'frame,class'");
    long frame = 0;
    try {
      size_t used = 0;
      frame = std::stol(line.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      parse_fail(file, line_no, "non-integer frame '" + line.substr(0, comma) + "'");
    }
    EventClass cls;
    try {
      cls = event_class_from_name(line.substr(comma + 1));
    } catch (const DataError& e) {
      parse_fail(file, line_no, e.what());
    }
    labels.push_back({frame, cls});
  }
  std::sort(labels.begin(), labels.end(), [](const EventLabel& a, const EventLabel& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return static_cast<int>(a.cls) < static_cast<int>(b.cls);
  });
  validate_labels(labels, frame_count);
  return labels;
}

std::pair<MatchTrajectories, std::vector<EventLabel>> load_match(
    const std::filesystem::path& trajectory_file,
    const std::filesystem::path& label_file) {
  MatchTrajectories match = load_trajectories(trajectory_file);
  std::vector<EventLabel> labels = load_labels(label_file, match.frame_count);
  return {std::move(match), std::move(labels)};
}

void save_trajectories(const MatchTrajectories& match,
                       const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write trajectory file " + file.string());
  out << "{\"fps\":" << format_double(match.fps)
      << ",\"frame_count\":" << match.frame_count
      << ",\"pitch_length\":" << format_double(match.pitch.length)
      << ",\"pitch_width\":" << format_double(match.pitch.width) << "}\n";

  std::string buf;
  buf.reserve(1 << 20);
  for (long f = 0; f < match.frame_count; ++f) {
    for (const auto& trk : match.tracks) {
      if (!trk.present[f]) continue;
      buf += "{\"frame\":";
      buf += std::to_string(f);
      buf += ",\"id\":\"";
      buf += trk.object_id;
      buf += "\",\"kind\":\"";
      buf += trk.kind == TrackKind::ball ? "ball" : "player";
      buf += "\",\"team\":";
      if (trk.team.has_value())
        buf += *trk.team == Team::home ? "\"home\"" : "\"away\"";
      else
        buf += "null";
      buf += ",\"x\":";
      buf += format_double(trk.x[f]);
      buf += ",\"y\":";
      buf += format_double(trk.y[f]);
      buf += "}\n";
      if (buf.size() > (1 << 20) - 512) {
        out << buf;
        buf.clear();
      }
    }
  }
  out << buf;
}

void save_labels(const std::vector<EventLabel>& labels,
                 const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write label file " + file.string());
  out << "frame,class\n";
  for (const auto& l : labels)
    out << l.frame << ',' << event_class_name(l.cls) << '\n';
}

}  // namespace trajevent
