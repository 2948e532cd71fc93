// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

// Videos as precomputed clip-feature sequences, the on-disk corpus format and
// a synthetic corpus generator.
//
// On disk a corpus is a directory holding `index.json` and one raw feature
// file per video (little-endian float32, row-major T x D, time-major):
//
//   {"num_classes": C,
//    "videos": [{"id", "feature_file", "T", "D", "duration_seconds",
//                "annotations": [{"center", "width", "class_id"}]}]}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gtan/gaussian.hpp"

namespace gtan::data {

inline constexpr std::size_t kMinVideoLength = 16;

struct GroundTruthInstance {
  double center = 0.0;  // normalized
  double width = 0.0;   // normalized
  int class_id = 0;

  gaussian::Segment segment() const {
    return gaussian::Segment::from_center_width(center, width);
  }
  bool operator==(const GroundTruthInstance&) const = default;
};

struct VideoRecord {
  std::string id;
  std::size_t length = 0;      // T
  std::size_t dim = 0;         // D
  std::vector<double> features;  // T x D, time-major
  std::vector<GroundTruthInstance> annotations;
  double duration_seconds = 0.0;

  double at(std::size_t t, std::size_t d) const { return features[t * dim + d]; }
  bool operator==(const VideoRecord&) const = default;
};

struct Dataset {
  int num_classes = 0;
  std::vector<VideoRecord> videos;

  bool operator==(const Dataset&) const = default;
};

// Throws ValidationError when an annotation breaks the segment invariants.
void validate_annotation(const GroundTruthInstance& gt, int num_classes);
void validate_record(const VideoRecord& video, int num_classes);

Dataset load_dataset(const std::filesystem::path& dir);

// Reads one raw float32 feature file with `dim` columns.
VideoRecord load_feature_file(const std::filesystem::path& file, std::size_t dim);

// Writes the corpus. Refuses a non-empty directory unless `overwrite`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                  bool overwrite = false);

struct SyntheticSpec {
  std::size_t num_videos = 100;
  std::size_t length = 128;
  std::size_t dim = 16;
  int num_classes = 3;
  std::size_t min_instances = 1;
  std::size_t max_instances = 3;
  double min_width = 0.05;
  double max_width = 0.6;
  double snr = 2.0;
  std::uint64_t seed = 0;
  // Seed for the class directions; corpora that share it (a train and a test
  // split drawn with different `seed`s) share their classes. Unset = seed.
  std::optional<std::uint64_t> class_seed;

  void validate() const;
};

// Largest IoU allowed between two generated instances of one video.
inline constexpr double kMaxInstanceOverlap = 0.1;

// Smooth flat-top envelope of an instance, evaluated at a normalized time;
// zero outside the open segment.
double instance_envelope(double position, const gaussian::Segment& segment);

// Gaussian background noise plus, for each instance, its class direction
// scaled by `snr` and the instance envelope. Features are rounded to float32
// so that a save/load round trip is exact.
Dataset generate_synthetic(const SyntheticSpec& spec);

// Unit direction vectors used for each class under `spec`'s seed.
std::vector<std::vector<double>> class_directions(const SyntheticSpec& spec);

}  // namespace gtan::data
