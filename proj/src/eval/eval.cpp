// SPDX-License-Identifier: Apache-2.0
#include "vo/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "vo/core/errors.hpp"

namespace vo {

namespace {

// Numeric token parse that rejects trailing garbage.
bool parse_double(const std::string& token, double& out) {
  const char* begin = token.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + token.size() && std::isfinite(out);
}

std::vector<double> parse_line(const std::string& line, int lineno,
                               const std::string& path) {
  std::vector<double> values;
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) {
    double v = 0.0;
    if (!parse_double(token, v)) {
      throw ParseError("bad numeric token '" + token + "' at line " +
                       std::to_string(lineno) + " of " + path);
    }
    values.push_back(v);
  }
  return values;
}

std::string strip_comment(const std::string& line) {
  auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

void check_increasing(const Trajectory& t, double ts, int lineno,
                      const std::string& path) {
  if (!t.entries.empty() && ts <= t.entries.back().timestamp) {
    throw ParseError("non-increasing timestamp at line " +
                     std::to_string(lineno) + " of " + path);
  }
}

TrajectoryEntry entry_from_tum(const std::vector<double>& v, int lineno,
                               const std::string& path) {
  const double qnorm =
      std::sqrt(v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]);
  if (qnorm < 1e-12) {
    throw ParseError("zero quaternion at line " + std::to_string(lineno) +
                     " of " + path);
  }
  TrajectoryEntry e;
  e.timestamp = v[0];
  e.pose = Se3::from_quaternion(v[4], v[5], v[6], v[7], Vec3(v[1], v[2], v[3]));
  return e;
}

TrajectoryEntry entry_from_kitti(const std::vector<double>& v, int lineno,
                                 const std::string& path) {
  Mat3 R;
  R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
  Vec3 t(v[3], v[7], v[11]);
  Se3 pose(R, t);
  if (pose.orthonormality_error() > 1e-3) {
    throw ParseError("rotation block not orthonormal at line " +
                     std::to_string(lineno) + " of " + path);
  }
  pose.orthonormalize();
  TrajectoryEntry e;
  e.timestamp = static_cast<double>(lineno - 1);
  e.pose = pose;
  return e;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

Trajectory read_lines(const std::string& path, std::size_t arity,
                      TrajectoryEntry (*make)(const std::vector<double>&, int,
                                              const std::string&)) {
  auto in = open_input(path);
  Trajectory tr;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto values = parse_line(strip_comment(line), lineno, path);
    if (values.empty()) continue;
    if (values.size() != arity) {
      throw ParseError("expected " + std::to_string(arity) + " values, got " +
                       std::to_string(values.size()) + " at line " +
                       std::to_string(lineno) + " of " + path);
    }
    TrajectoryEntry e = make(values, lineno, path);
    check_increasing(tr, e.timestamp, lineno, path);
    tr.entries.push_back(e);
  }
  return tr;
}

// Positions of the matched sub-sequences.
struct Matched {
  std::vector<Se3> est;
  std::vector<Se3> truth;
  std::vector<double> stamps;  // estimate-side timestamps
};

Matched gather(const Trajectory& estimate, const Trajectory& truth) {
  Matched m;
  for (auto [i, j] : associate(estimate, truth)) {
    m.est.push_back(estimate.entries[i].pose);
    m.truth.push_back(truth.entries[j].pose);
    m.stamps.push_back(estimate.entries[i].timestamp);
  }
  return m;
}

double scale_factor(const std::vector<Se3>& est,
                    const std::vector<Se3>& truth) {
  const Vec3 e0 = est.front().translation();
  const Vec3 g0 = truth.front().translation();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < est.size(); ++k) {
    const Vec3 pe = est[k].translation() - e0;
    const Vec3 pg = truth[k].translation() - g0;
    num += pe.dot(pg);
    den += pe.dot(pe);
  }
  return den < 1e-30 ? 1.0 : num / den;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> associate(
    const Trajectory& estimate, const Trajectory& truth, double window) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const auto& te = estimate.entries;
  const auto& tg = truth.entries;
  if (te.empty() || tg.empty()) return pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < te.size(); ++i) {
    const double t = te[i].timestamp;
    while (j + 1 < tg.size() &&
           std::abs(tg[j + 1].timestamp - t) <= std::abs(tg[j].timestamp - t)) {
      ++j;
    }
    if (std::abs(tg[j].timestamp - t) <= window) {
      pairs.emplace_back(i, j);
      ++j;
      if (j >= tg.size()) break;
    }
  }
  return pairs;
}

ScaleAlignment align_scale(const Trajectory& estimate,
                           const Trajectory& truth) {
  Matched m = gather(estimate, truth);
  if (m.est.size() < 2) {
    throw AssociationFailure("scale alignment needs at least 2 matched poses, got " +
                             std::to_string(m.est.size()));
  }
  ScaleAlignment out;
  out.factor = scale_factor(m.est, m.truth);
  out.aligned = estimate;
  for (auto& e : out.aligned.entries) e.pose.translation() *= out.factor;
  return out;
}

DriftErrors kitti_drift(const Trajectory& estimate, const Trajectory& truth) {
  Matched m = gather(estimate, truth);
  const std::size_t n = m.est.size();
  std::vector<double> dist(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    dist[k] = dist[k - 1] +
              (m.truth[k].translation() - m.truth[k - 1].translation()).norm();
  }
  double t_sq = 0.0;
  double r_sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int length = 100; length <= 800; length += 100) {
      const double target = dist[i] + length;
      auto it = std::lower_bound(dist.begin() + static_cast<long>(i),
                                 dist.end(), target);
      if (it == dist.end()) break;
      const std::size_t jj = static_cast<std::size_t>(it - dist.begin());
      const double seg = dist[jj] - dist[i];
      const Se3 dg = m.truth[i].inverse() * m.truth[jj];
      const Se3 de = m.est[i].inverse() * m.est[jj];
      const Se3 err = dg.inverse() * de;
      const double te = err.translation().norm() / seg;
      const double re = err.rotation_angle() / seg;
      t_sq += te * te;
      r_sq += re * re;
      ++count;
    }
  }
  if (count == 0) {
    throw PathTooShort("no 100 m segment in a " +
                       std::to_string(n ? dist.back() : 0.0) + " m path");
  }
  DriftErrors out;
  out.t_err = std::sqrt(t_sq / static_cast<double>(count)) * 100.0;
  out.r_err = std::sqrt(r_sq / static_cast<double>(count)) * (180.0 / M_PI) * 100.0;
  return out;
}

RpeAte rpe_ate(const Trajectory& estimate, const Trajectory& truth,
               double delta_seconds) {
  Matched m = gather(estimate, truth);
  const std::size_t n = m.est.size();
  if (n < 2) {
    throw AssociationFailure("relative pose error needs at least 2 matched poses, got " +
                             std::to_string(n));
  }

  double rpe_sq = 0.0;
  std::size_t rpe_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double target = m.stamps[i] + delta_seconds;
    auto it = std::lower_bound(m.stamps.begin(), m.stamps.end(), target);
    std::size_t k = static_cast<std::size_t>(it - m.stamps.begin());
    if (k > 0 && (k == n || std::abs(m.stamps[k - 1] - target) <=
                                std::abs(m.stamps[k] - target))) {
      --k;
    }
    if (k <= i || k >= n) continue;
    if (std::abs(m.stamps[k] - target) > kAssociationWindow) continue;
    const Se3 dg = m.truth[i].inverse() * m.truth[k];
    const Se3 de = m.est[i].inverse() * m.est[k];
    const double te = (dg.inverse() * de).translation().norm() / delta_seconds;
    rpe_sq += te * te;
    ++rpe_count;
  }
  if (rpe_count == 0) {
    throw AssociationFailure("no pose pairs at delta " +
                             std::to_string(delta_seconds) + " s");
  }

  // ATE: single scale, then rigid fit of scaled estimate onto truth.
  const double s = scale_factor(m.est, m.truth);
  Vec3 ce = Vec3::Zero();
  Vec3 cg = Vec3::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    ce += s * m.est[k].translation();
    cg += m.truth[k].translation();
  }
  ce /= static_cast<double>(n);
  cg /= static_cast<double>(n);
  Mat3 H = Mat3::Zero();
  for (std::size_t k = 0; k < n; ++k) {
    H += (s * m.est[k].translation() - ce) *
         (m.truth[k].translation() - cg).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  const Vec3 t = cg - R * ce;
  double ate_sq = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Vec3 r = R * (s * m.est[k].translation()) + t -
                   m.truth[k].translation();
    ate_sq += r.squaredNorm();
  }

  RpeAte out;
  out.rpe_trans = std::sqrt(rpe_sq / static_cast<double>(rpe_count));
  out.ate_rmse = std::sqrt(ate_sq / static_cast<double>(n));
  return out;
}

double scale_drift(const Trajectory& estimate, const Trajectory& truth) {
  Matched m = gather(estimate, truth);
  const std::size_t n = m.est.size();
  if (n < 10) {
    throw AssociationFailure("scale drift needs at least 10 matched poses, got " +
                             std::to_string(n));
  }
  const std::size_t span = std::max<std::size_t>(2, n / 5);
  std::vector<Se3> he(m.est.begin(), m.est.begin() + static_cast<long>(span));
  std::vector<Se3> hg(m.truth.begin(),
                      m.truth.begin() + static_cast<long>(span));
  std::vector<Se3> te(m.est.end() - static_cast<long>(span), m.est.end());
  std::vector<Se3> tg(m.truth.end() - static_cast<long>(span), m.truth.end());
  const double s0 = scale_factor(he, hg);
  const double s1 = scale_factor(te, tg);
  if (std::abs(s0) < 1e-30) {
    throw AssociationFailure("degenerate head segment: zero scale");
  }
  return std::abs(s1 / s0 - 1.0);
}

MetricReport evaluate(const Trajectory& estimate, const Trajectory& truth,
                      double rpe_delta_seconds) {
  ScaleAlignment a = align_scale(estimate, truth);
  MetricReport r;
  r.scale = a.factor;
  const RpeAte pa = rpe_ate(a.aligned, truth, rpe_delta_seconds);
  r.rpe_trans = pa.rpe_trans;
  r.ate_rmse = pa.ate_rmse;
  try {
    const DriftErrors d = kitti_drift(a.aligned, truth);
    r.t_err = d.t_err;
    r.r_err = d.r_err;
    r.drift_valid = true;
  } catch (const PathTooShort&) {
    r.drift_valid = false;
  }
  return r;
}

Trajectory read_tum(const std::string& path) {
  return read_lines(path, 8, &entry_from_tum);
}

Trajectory read_kitti(const std::string& path) {
  return read_lines(path, 12, &entry_from_kitti);
}

Trajectory read_trajectory(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto values = parse_line(strip_comment(line), lineno, path);
    if (values.empty()) continue;
    if (values.size() == 8) return read_tum(path);
    if (values.size() == 12) return read_kitti(path);
    throw ParseError("unrecognized trajectory format: " +
                     std::to_string(values.size()) + " values at line " +
                     std::to_string(lineno) + " of " + path);
  }
  return Trajectory{};
}

void write_tum(const Trajectory& trajectory, const std::string& path) {
  auto out = open_output(path);
  out << std::setprecision(17);
  for (const auto& e : trajectory.entries) {
    const auto q = e.pose.quaternion();
    const Vec3& t = e.pose.translation();
    out << e.timestamp << ' ' << t.x() << ' ' << t.y() << ' ' << t.z() << ' '
        << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

void write_kitti(const Trajectory& trajectory, const std::string& path) {
  auto out = open_output(path);
  out << std::setprecision(17);
  for (const auto& e : trajectory.entries) {
    const Mat3& R = e.pose.rotation();
    const Vec3& t = e.pose.translation();
    for (int row = 0; row < 3; ++row) {
      out << R(row, 0) << ' ' << R(row, 1) << ' ' << R(row, 2) << ' '
          << t(row) << (row == 2 ? '\n' : ' ');
    }
  }
}

void write_trajectory_csv(const Trajectory& trajectory,
                          const std::string& path) {
  auto out = open_output(path);
  out << "timestamp,tx,ty,tz,qx,qy,qz,qw\n" << std::setprecision(17);
  for (const auto& e : trajectory.entries) {
    const auto q = e.pose.quaternion();
    const Vec3& t = e.pose.translation();
    out << e.timestamp << ',' << t.x() << ',' << t.y() << ',' << t.z() << ','
        << q.x() << ',' << q.y() << ',' << q.z() << ',' << q.w() << '\n';
  }
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::json j;
  j["t_err_percent"] = report.drift_valid ? nlohmann::json(report.t_err)
                                          : nlohmann::json(nullptr);
  j["r_err_deg_per_100m"] = report.drift_valid ? nlohmann::json(report.r_err)
                                               : nlohmann::json(nullptr);
  j["ate_rmse_m"] = report.ate_rmse;
  j["rpe_trans_m_per_s"] = report.rpe_trans;
  j["scale"] = report.scale;
  j["drift_valid"] = report.drift_valid;
  return j.dump();
}

}  // namespace vo
