#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "trajevent/trajectory.hpp"

namespace trajevent {

// Trajectory files are JSON lines. The first line is a metadata header
//   {"pitch_length": 105.0, "pitch_width": 68.0, "fps": 30.0, "frame_count": N}
// followed by one record per (frame, object):
//   {"frame": 0, "id": "h00", "kind": "player", "team": "home", "x": 1.0, "y": 2.0}
// A missing record for a frame means the object was absent on that frame.
// Label files are CSV with header `frame,class`.

std::pair<MatchTrajectories, std::vector<EventLabel>> load_match(
    const std::filesystem::path& trajectory_file,
    const std::filesystem::path& label_file);

MatchTrajectories load_trajectories(const std::filesystem::path& file);
std::vector<EventLabel> load_labels(const std::filesystem::path& file,
                                    long frame_count);

void save_trajectories(const MatchTrajectories& match,
                       const std::filesystem::path& file);
void save_labels(const std::vector<EventLabel>& labels,
                 const std::filesystem::path& file);

}  // namespace trajevent
