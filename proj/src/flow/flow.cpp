// SPDX-License-Identifier: Apache-2.0
#include "vo/flow/flow.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>

#include "vo/core/errors.hpp"
#include "vo/kernels/kernels.hpp"

namespace vo {

CorrespondenceSet select_robust(const FlowField& fkt, const FlowField& ftk,
                                const RobustnessThresholds& th) {
  if (!fkt.same_size(ftk))
    throw DimensionMismatch("flow field dimensions differ");
  const int h = fkt.height, w = fkt.width;
  const size_t n = static_cast<size_t>(h) * w;
  std::vector<std::uint8_t> keep(n);
  std::vector<double> err(n);
  kernels::flow_consistency(fkt.dx.data(), fkt.dy.data(), ftk.dx.data(),
                            ftk.dy.data(), h, w, th.delta1, th.delta2,
                            keep.data(), err.data());

  CorrespondenceSet cs;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t k = fkt.idx(x, y);
      if (!keep[k]) continue;
      Correspondence c;
      c.p_k = Vec2(x, y);
      const Vec2 f = fkt.at(x, y);
      c.p_t = c.p_k + f;
      c.consistency_residual = err[k];
      c.flow_magnitude = std::sqrt(f.x() * f.x() + f.y() * f.y());
      cs.pairs.push_back(c);
    }
  }

  if (cs.pairs.size() > th.max_correspondences) {
    std::vector<Correspondence> kept;
    kept.reserve(th.max_correspondences);
    const size_t total = cs.pairs.size();
    for (size_t i = 0; i < th.max_correspondences; ++i)
      kept.push_back(cs.pairs[i * total / th.max_correspondences]);
    cs.pairs = std::move(kept);
  }
  return cs;
}

double mean_flow(const CorrespondenceSet& cs) {
  if (cs.empty()) throw EmptySet("mean flow of an empty correspondence set");
  double sum = 0;
  for (const auto& c : cs.pairs) sum += c.flow_magnitude;
  return sum / static_cast<double>(cs.size());
}

bool should_create_keyframe(const CorrespondenceSet& cs,
                            const RobustnessThresholds& th) {
  if (cs.empty()) return true;
  return mean_flow(cs) > th.keyframe_mean_flow;
}

namespace {
constexpr float kFloMagic = 202021.25f;
}

FlowField load_flo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  float magic = 0;
  std::int32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || magic != kFloMagic)
    throw ParseError(path + ": bad flow file magic");
  if (w <= 0 || h <= 0 || w > 1 << 16 || h > 1 << 16)
    throw ParseError(path + ": bad flow dimensions");
  FlowField f(w, h);
  std::vector<float> row(static_cast<size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * 4));
    if (!in) throw ParseError(path + ": truncated flow data");
    for (int x = 0; x < w; ++x) {
      f.dx[f.idx(x, y)] = row[2 * x];
      f.dy[f.idx(x, y)] = row[2 * x + 1];
    }
  }
  return f;
}

void save_flo(const std::string& path, const FlowField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const float magic = kFloMagic;
  const std::int32_t w = f.width, h = f.height;
  out.write(reinterpret_cast<const char*>(&magic), 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(static_cast<size_t>(f.width) * 2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[2 * x] = static_cast<float>(f.dx[f.idx(x, y)]);
      row[2 * x + 1] = static_cast<float>(f.dy[f.idx(x, y)]);
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * 4));
  }
  if (!out) throw IoError("short write to " + path);
}

}  // namespace vo
