#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanecal/geometry.hpp"
#include "lanecal/ipm.hpp"
#include "lanecal/pipeline.hpp"
#include "lanecal/synth.hpp"

namespace lanecal::io {

using ordered_json = nlohmann::ordered_json;

/// Round to a fixed number of decimals by formatting and re-parsing; this is
/// exactly the value a reader of the emitted file will see.
inline double quantize(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return std::strtod(buf, nullptr);
}

// ---------------------------------------------------------------------------
// intrinsics JSON: {"fx":f,"fy":f,"cx":f,"cy":f}

inline void write_intrinsics(const CameraIntrinsics& k, const std::string& path) {
  ordered_json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << j.dump() << "\n";
}

inline CameraIntrinsics read_intrinsics(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  ordered_json j;
  try {
    in >> j;
    return {j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
            j.at("cy").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// observations JSONL, one frame per line:
// {"frame":int,"segments":[{"p1":[u,v],"p2":[u,v],"boundary_id":int|null}],
//  "gt":{"pitch_deg":f,"yaw_deg":f,"roll_deg":f,"height_m":f}|null}

inline ordered_json observation_to_json(const FrameObservation& obs) {
  ordered_json j;
  j["frame"] = obs.frame_index;
  ordered_json segs = ordered_json::array();
  for (const auto& s : obs.segments) {
    ordered_json js;
    js["p1"] = {s.p1.x(), s.p1.y()};
    js["p2"] = {s.p2.x(), s.p2.y()};
    if (s.boundary_id)
      js["boundary_id"] = *s.boundary_id;
    else
      js["boundary_id"] = nullptr;
    segs.push_back(std::move(js));
  }
  j["segments"] = std::move(segs);
  if (obs.gt) {
    // angles quantized to 1e-13 deg so that the degree/radian conversion
    // round-trips to identical bytes; height carries no unit conversion
    ordered_json g;
    g["pitch_deg"] = quantize(rad2deg(obs.gt->theta), 13);
    g["yaw_deg"] = quantize(rad2deg(obs.gt->phi), 13);
    g["roll_deg"] = quantize(rad2deg(obs.gt->psi), 13);
    g["height_m"] = obs.gt->h;
    j["gt"] = std::move(g);
  } else {
    j["gt"] = nullptr;
  }
  return j;
}

inline FrameObservation observation_from_json(const ordered_json& j) {
  FrameObservation obs;
  try {
    obs.frame_index = j.at("frame").get<int>();
    for (const auto& js : j.at("segments")) {
      std::optional<int> id;
      if (!js.at("boundary_id").is_null()) id = js.at("boundary_id").get<int>();
      obs.segments.emplace_back(Vec2(js.at("p1")[0].get<double>(), js.at("p1")[1].get<double>()),
                                Vec2(js.at("p2")[0].get<double>(), js.at("p2")[1].get<double>()),
                                id);
    }
    if (!j.at("gt").is_null()) {
      ExtrinsicEstimate gt;
      gt.theta = deg2rad(j["gt"].at("pitch_deg").get<double>());
      gt.phi = deg2rad(j["gt"].at("yaw_deg").get<double>());
      gt.psi = deg2rad(j["gt"].at("roll_deg").get<double>());
      gt.h = j["gt"].at("height_m").get<double>();
      obs.gt = gt;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, std::string("bad observation record: ") + e.what());
  }
  return obs;
}

inline void write_observations(const std::vector<FrameObservation>& seq, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  for (const auto& obs : seq) out << observation_to_json(obs).dump() << "\n";
}

inline std::vector<FrameObservation> read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::vector<FrameObservation> seq;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::IoError, path + ": " + e.what());
    }
    seq.push_back(observation_from_json(j));
  }
  return seq;
}

// ---------------------------------------------------------------------------
// trace CSV: frame,pitch_deg,yaw_deg,roll_deg,height_m,inliers,flags
// (degrees to 6 decimals, meters to 5)

struct TraceRow {
  int frame{0};
  double pitch_deg{0.0};
  double yaw_deg{0.0};
  double roll_deg{0.0};
  double height_m{0.0};
  int inliers{0};
  std::string flags{"-"};
};

inline TraceRow make_trace_row(const FrameResult& r) {
  TraceRow row;
  row.frame = r.frame_index;
  row.pitch_deg = quantize(rad2deg(r.estimate.theta), 6);
  row.yaw_deg = quantize(rad2deg(r.estimate.phi), 6);
  row.roll_deg = quantize(rad2deg(r.estimate.psi), 6);
  row.height_m = quantize(r.estimate.h, 5);
  row.inliers = r.vp_inliers;
  row.flags = r.flags();
  return row;
}

inline std::string format_trace_row(const TraceRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.5f,%d,%s", r.frame, r.pitch_deg, r.yaw_deg,
                r.roll_deg, r.height_m, r.inliers, r.flags.c_str());
  return buf;
}

inline void write_trace(const std::vector<TraceRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << "frame,pitch_deg,yaw_deg,roll_deg,height_m,inliers,flags\n";
  for (const auto& r : rows) out << format_trace_row(r) << "\n";
}

inline std::vector<TraceRow> read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::vector<TraceRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> cols;
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 7) fail(ErrorCode::IoError, path + ": bad trace row: " + line);
    TraceRow r;
    r.frame = std::atoi(cols[0].c_str());
    r.pitch_deg = std::strtod(cols[1].c_str(), nullptr);
    r.yaw_deg = std::strtod(cols[2].c_str(), nullptr);
    r.roll_deg = std::strtod(cols[3].c_str(), nullptr);
    r.height_m = std::strtod(cols[4].c_str(), nullptr);
    r.inliers = std::atoi(cols[5].c_str());
    r.flags = cols[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// homography JSON: 3x3 row-major nested array

inline void write_homography(const Homography& h, const std::string& path) {
  ordered_json j = ordered_json::array();
  for (int r = 0; r < 3; ++r) j.push_back({h.m(r, 0), h.m(r, 1), h.m(r, 2)});
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << j.dump() << "\n";
}

inline Homography read_homography(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  ordered_json j;
  try {
    in >> j;
    Homography h;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) h.m(r, c) = j.at(r).at(c).get<double>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// RMSE report JSON

struct RmseReport {
  double pitch_deg{0.0};
  double yaw_deg{0.0};
  double roll_deg{0.0};
  double height_cm{0.0};
  int runs{0};
  int burn_in{0};
};

inline void write_rmse_report(const RmseReport& r, const std::string& path) {
  ordered_json j;
  j["pitch_deg"] = r.pitch_deg;
  j["yaw_deg"] = r.yaw_deg;
  j["roll_deg"] = r.roll_deg;
  j["height_cm"] = r.height_cm;
  j["runs"] = r.runs;
  j["burn_in"] = r.burn_in;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path);
  out << j.dump() << "\n";
}

inline RmseReport read_rmse_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  ordered_json j;
  try {
    in >> j;
    RmseReport r;
    r.pitch_deg = j.at("pitch_deg").get<double>();
    r.yaw_deg = j.at("yaw_deg").get<double>();
    r.roll_deg = j.at("roll_deg").get<double>();
    r.height_cm = j.at("height_cm").get<double>();
    r.runs = j.at("runs").get<int>();
    r.burn_in = j.at("burn_in").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IoError, path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// RMSE accumulation over trace rows against ground truth. The estimates enter
// at file precision (quantized), ground truth at full precision, so the same
// numbers come out whether the rows lived in memory or in a CSV.

struct RmseAccumulator {
  double sq[4]{0.0, 0.0, 0.0, 0.0};
  long long n{0};

  void add(const TraceRow& row, const ExtrinsicEstimate& gt) {
    const double e0 = row.pitch_deg - rad2deg(gt.theta);
    const double e1 = row.yaw_deg - rad2deg(gt.phi);
    const double e2 = row.roll_deg - rad2deg(gt.psi);
    const double e3 = (row.height_m - gt.h) * 100.0;  // cm
    sq[0] += e0 * e0;
    sq[1] += e1 * e1;
    sq[2] += e2 * e2;
    sq[3] += e3 * e3;
    n += 1;
  }

  void merge(const RmseAccumulator& other) {
    for (int i = 0; i < 4; ++i) sq[i] += other.sq[i];
    n += other.n;
  }

  RmseReport report(int runs, int burn_in) const {
    if (n == 0) fail(ErrorCode::EmptyInput, "no frames contributed to the RMSE");
    RmseReport r;
    r.pitch_deg = std::sqrt(sq[0] / static_cast<double>(n));
    r.yaw_deg = std::sqrt(sq[1] / static_cast<double>(n));
    r.roll_deg = std::sqrt(sq[2] / static_cast<double>(n));
    r.height_cm = std::sqrt(sq[3] / static_cast<double>(n));
    r.runs = runs;
    r.burn_in = burn_in;
    return r;
  }
};

/// RMSE of a written trace against the ground truth of an observation
/// sequence, skipping the first burn_in frames.
inline RmseReport evaluate_trace(const std::vector<TraceRow>& rows,
                                 const std::vector<FrameObservation>& obs, int burn_in) {
  std::map<int, const FrameObservation*> by_frame;
  for (const auto& o : obs) by_frame[o.frame_index] = &o;
  RmseAccumulator acc;
  for (const auto& row : rows) {
    if (row.frame < burn_in) continue;
    const auto it = by_frame.find(row.frame);
    if (it == by_frame.end() || !it->second->gt) continue;
    acc.add(row, *it->second->gt);
  }
  return acc.report(1, burn_in);
}

}  // namespace lanecal::io
