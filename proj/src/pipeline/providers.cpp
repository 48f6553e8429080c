// SPDX-License-Identifier: Apache-2.0
#include "vo/pipeline/providers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "vo/core/errors.hpp"
#include "vo/core/image_io.hpp"
#include "vo/core/rng.hpp"

namespace vo {

namespace {

// Stable per-query seed: splitmix finalizer over (seed, tag, a, b).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t a,
                       std::uint64_t b) {
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * (tag + 1) +
                    0xBF58476D1CE4E5B9ULL * (a + 1) +
                    0x94D049BB133111EBULL * (b + 1);
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t kTagIntensity = 0xA1;
constexpr std::uint64_t kTagFlow = 0xA2;

// Uncertainty assigned to matches the provider knows are unreliable.
constexpr double kOccludedGamma = 10.0;
constexpr std::uint64_t kTagDepth = 0xA3;

}  // namespace

Image SyntheticSource::image(int frame) {
  RenderOut out = render(scene_, frame);
  Rng rng(mix_seed(cfg_.seed, kTagIntensity, static_cast<std::uint64_t>(frame), 0));
  return corrupt_intensity(out.intensity, cfg_.noise, frame, rng);
}

bool SyntheticFlowProvider::available(int keyframe, int target) const {
  return keyframe >= 0 && target > keyframe && target < scene_.num_frames;
}

FlowQueryResult SyntheticFlowProvider::query(int keyframe, int target) {
  FlowPair pair = ground_truth_flow(scene_, keyframe, target);
  Rng rng(mix_seed(cfg_.seed, kTagFlow, static_cast<std::uint64_t>(keyframe),
                   static_cast<std::uint64_t>(target)));
  FlowQueryResult out;
  out.forward = corrupt_flow(pair.forward, cfg_.noise, rng);
  out.backward = corrupt_flow(pair.backward, cfg_.noise, rng);
  // The uncertainty grid flags unreliable matches: occluded or out-of-view
  // pixels carry a large gamma so photometric terms there carry no weight.
  out.gamma = Image(scene_.K.width, scene_.K.height, cfg_.gamma);
  for (int y = 0; y < scene_.K.height; ++y) {
    for (int x = 0; x < scene_.K.width; ++x) {
      if (!pair.valid_forward.at(x, y)) out.gamma.at(x, y) = kOccludedGamma;
    }
  }
  return out;
}

DepthQueryResult SyntheticDepthProvider::query(int frame) {
  RenderOut out = render(scene_, frame);
  Rng rng(mix_seed(cfg_.seed, kTagDepth, static_cast<std::uint64_t>(frame), 0));
  DepthQueryResult q;
  q.depth = corrupt_depth(out.depth, cfg_.noise, rng);
  q.valid = out.depth_valid;
  q.sigma = Image(q.depth.width(), q.depth.height());
  for (int y = 0; y < q.depth.height(); ++y) {
    for (int x = 0; x < q.depth.width(); ++x) {
      const double d = q.depth.at(x, y);
      q.sigma.at(x, y) = d > 0 ? cfg_.sigma_rel / d : 0.0;
    }
  }
  return q;
}

std::string frame_path(const std::string& dir, const char* stem, int index,
                       const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06d.%s", stem, index, ext);
  return dir + "/" + buf;
}

DatasetSource::DatasetSource(const std::string& dir) : dir_(dir) {
  const std::string times = dir + "/times.txt";
  std::ifstream in(times);
  if (!in) throw IoError("cannot open " + times);
  double t = 0;
  while (in >> t) timestamps_.push_back(t);
}

double DatasetSource::timestamp(int frame) const {
  if (frame < 0 || frame >= num_frames()) {
    throw IoError("frame index " + std::to_string(frame) + " out of range in " +
                  dir_);
  }
  return timestamps_[static_cast<std::size_t>(frame)];
}

Image DatasetSource::image(int frame) {
  return load_image(frame_path(dir_, "frame", frame, "png"));
}

FlowQueryResult DatasetFlowProvider::query(int keyframe, int target) {
  if (!available(keyframe, target)) {
    throw IoError("flow pair (" + std::to_string(keyframe) + ", " +
                  std::to_string(target) + ") not stored in " + dir_);
  }
  FlowQueryResult out;
  out.forward = load_flo(frame_path(dir_, "flow_fw", keyframe, "flo"));
  out.backward = load_flo(frame_path(dir_, "flow_bw", keyframe, "flo"));
  out.gamma = Image(out.forward.width, out.forward.height, gamma_);
  return out;
}

DepthQueryResult DatasetDepthProvider::query(int frame) {
  DepthQueryResult q;
  q.depth = load_pfm(frame_path(dir_, "depth", frame, "pfm"));
  q.valid = Mask(q.depth.width(), q.depth.height(), false);
  q.sigma = Image(q.depth.width(), q.depth.height());
  for (int y = 0; y < q.depth.height(); ++y) {
    for (int x = 0; x < q.depth.width(); ++x) {
      const double d = q.depth.at(x, y);
      if (d > 0 && std::isfinite(d)) {
        q.valid.set(x, y, true);
        q.sigma.at(x, y) = sigma_rel_ / d;
      }
    }
  }
  return q;
}

}  // namespace vo
