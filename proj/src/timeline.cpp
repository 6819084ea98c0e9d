#include "trajevent/timeline.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "trajevent/common.hpp"

namespace trajevent {

ProbabilityTimeline infer_timeline(const Model& model,
                                   const MatchTrajectories& match, long start,
                                   long end, const WindowSpec& spec,
                                   size_t workers, size_t* no_ball_rows) {
  if (start < 0 || end > match.frame_count || start >= end)
    throw ContractError("infer_timeline: segment [" + std::to_string(start) +
                        ", " + std::to_string(end) + ") outside match of " +
                        std::to_string(match.frame_count) + " frames");
  if (model.config().T != spec.T || model.config().K != spec.K)
    throw ContractError("infer_timeline: window spec does not match model");

  ProbabilityTimeline tl;
  tl.match_id = match.match_id;
  tl.start = start;
  tl.end = end;
  tl.rows.resize(end - start);

  std::atomic<size_t> no_ball{0};
  auto run_range = [&](long lo, long hi) {
    WindowSpec s = spec;
    for (long f = lo; f < hi; ++f) {
      s.center = f;
      try {
        tl.rows[f - start] = model.forward(build_window(match, s));
      } catch (const NoBallError&) {
        tl.rows[f - start] = {1.0, 0.0, 0.0, 0.0};
        no_ball.fetch_add(1, std::memory_order_relaxed);
      }
    }
  };

  const size_t nw =
      std::max<size_t>(1, std::min<size_t>(workers, tl.rows.size()));
  if (nw == 1) {
    run_range(start, end);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (end - start + nw - 1) / static_cast<long>(nw);
    for (size_t w = 0; w < nw; ++w) {
      const long lo = start + static_cast<long>(w) * chunk;
      const long hi = std::min(end, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  if (no_ball_rows != nullptr) *no_ball_rows = no_ball.load();
  return tl;
}

void save_timeline_csv(const ProbabilityTimeline& tl,
                       const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write timeline " + file.string());
  out << "frame,p_background,p_pass,p_reception,p_shot\n";
  std::string buf;
  buf.reserve(1 << 20);
  for (long t = 0; t < tl.frames(); ++t) {
    buf += std::to_string(tl.start + t);
    for (int c = 0; c < kNumClasses; ++c) {
      buf += ',';
      buf += format_double(tl.rows[t][c]);
    }
    buf += '\n';
    if (buf.size() > (1 << 20) - 256) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

ProbabilityTimeline load_timeline_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open timeline " + file.string());
  ProbabilityTimeline tl;
  tl.match_id = file.stem().string();
  std::string line;
  size_t line_no = 0;
  bool first_row = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "frame,p_background,p_pass,p_reception,p_shot")
        throw DataError(file.string() + ":1: unexpected timeline header");
      continue;
    }
    std::stringstream ss(line);
    std::string tok;
    std::array<double, kNumClasses> row{};
    long frame = 0;
    for (int col = 0; col <= kNumClasses; ++col) {
      if (!std::getline(ss, tok, ','))
        throw DataError(file.string() + ":" + std::to_string(line_no) +
                        ": expected " + std::to_string(kNumClasses + 1) +
                        " columns");
      if (col == 0)
        frame = std::stol(tok);
      else
        row[col - 1] = std::stod(tok);
    }
    if (first_row) {
      tl.start = frame;
      first_row = false;
    } else if (frame != tl.start + static_cast<long>(tl.rows.size())) {
      throw DataError(file.string() + ":" + std::to_string(line_no) +
                      ": non-contiguous frame index");
    }
    tl.rows.push_back(row);
  }
  tl.end = tl.start + static_cast<long>(tl.rows.size());
  return tl;
}

}  // namespace trajevent
