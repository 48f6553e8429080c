// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vo/core/image.hpp"
#include "vo/flow/flow.hpp"
#include "vo/synth/synth.hpp"

namespace vo {

// Dense flow between a keyframe and a target frame plus the photometric
// uncertainty of the pair, indexed at keyframe pixels.
struct FlowQueryResult {
  FlowField forward;   // keyframe -> target
  FlowField backward;  // target -> keyframe
  Image gamma;
};

// Single-frame depth prior: metric depth, inverse-depth uncertainty,
// validity.
struct DepthQueryResult {
  Image depth;
  Image sigma;
  Mask valid;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int num_frames() const = 0;
  virtual double timestamp(int frame) const = 0;
  virtual Image image(int frame) = 0;
};

class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  // Whether the provider can serve this frame pair at all.
  virtual bool available(int keyframe, int target) const = 0;
  virtual FlowQueryResult query(int keyframe, int target) = 0;
};

class DepthProvider {
 public:
  virtual ~DepthProvider() = default;
  virtual DepthQueryResult query(int frame) = 0;
};

// Shared knobs of the oracle providers: corruption model, reported
// uncertainty level, and the seed every per-query noise draw derives from.
struct ProviderConfig {
  NoiseSpec noise;
  std::uint64_t seed = 1;
  double sigma_rel = 0.6;  // reported sigma = sigma_rel * inverse depth
  double gamma = 0.1;      // uniform photometric uncertainty
  double fps = 10.0;       // synthetic timestamps, frames per second
};

// Renders scene frames, optionally with the exposure/noise model applied.
class SyntheticSource : public FrameSource {
 public:
  SyntheticSource(const SceneSpec& scene, const ProviderConfig& cfg)
      : scene_(scene), cfg_(cfg) {}

  int num_frames() const override { return scene_.num_frames; }
  double timestamp(int frame) const override { return frame / cfg_.fps; }
  Image image(int frame) override;

 private:
  SceneSpec scene_;
  ProviderConfig cfg_;
};

// Exact ground-truth flow for any frame pair, corrupted per query with a
// seed derived from (seed, pair); re-queries are bit-identical.
class SyntheticFlowProvider : public FlowProvider {
 public:
  SyntheticFlowProvider(const SceneSpec& scene, const ProviderConfig& cfg)
      : scene_(scene), cfg_(cfg) {}

  bool available(int keyframe, int target) const override;
  FlowQueryResult query(int keyframe, int target) override;

 private:
  SceneSpec scene_;
  ProviderConfig cfg_;
};

class SyntheticDepthProvider : public DepthProvider {
 public:
  SyntheticDepthProvider(const SceneSpec& scene, const ProviderConfig& cfg)
      : scene_(scene), cfg_(cfg) {}

  DepthQueryResult query(int frame) override;

 private:
  SceneSpec scene_;
  ProviderConfig cfg_;
};

// Directory layout: times.txt (one timestamp per line), frame_NNNNNN.png,
// depth_NNNNNN.pfm, flow_fw_NNNNNN.flo / flow_bw_NNNNNN.flo for the pair
// (N, N+1).
std::string frame_path(const std::string& dir, const char* stem, int index,
                       const char* ext);

class DatasetSource : public FrameSource {
 public:
  explicit DatasetSource(const std::string& dir);

  int num_frames() const override {
    return static_cast<int>(timestamps_.size());
  }
  double timestamp(int frame) const override;
  Image image(int frame) override;

 private:
  std::string dir_;
  std::vector<double> timestamps_;
};

// Serves adjacent pairs only; the pipeline promotes its keyframe when a
// wider pair is requested.
class DatasetFlowProvider : public FlowProvider {
 public:
  DatasetFlowProvider(const std::string& dir, double gamma)
      : dir_(dir), gamma_(gamma) {}

  bool available(int keyframe, int target) const override {
    return target == keyframe + 1;
  }
  FlowQueryResult query(int keyframe, int target) override;

 private:
  std::string dir_;
  double gamma_;
};

class DatasetDepthProvider : public DepthProvider {
 public:
  DatasetDepthProvider(const std::string& dir, double sigma_rel)
      : dir_(dir), sigma_rel_(sigma_rel) {}

  DepthQueryResult query(int frame) override;

 private:
  std::string dir_;
  double sigma_rel_;
};

}  // namespace vo
