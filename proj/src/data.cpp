// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "gtan/errors.hpp"
#include "json.hpp"

namespace gtan::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr double kSegmentTolerance = 1e-9;

std::vector<double> read_float32(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open feature file " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0) {
    throw ValidationError("feature file " + file.string() + " is not a whole number of float32 values");
  }
  std::vector<double> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const unsigned char* p = bytes.data() + 4 * i;
    const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                               (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
    values[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return values;
}

void write_float32(const fs::path& file, const std::vector<double>& values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write feature file " + file.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + file.string());
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace

void validate_annotation(const GroundTruthInstance& gt, int num_classes) {
  if (!std::isfinite(gt.center) || !std::isfinite(gt.width)) {
    throw ValidationError("annotation has non-finite coordinates");
  }
  if (!(gt.center > 0.0 && gt.center < 1.0)) {
    throw ValidationError("annotation centre " + std::to_string(gt.center) + " outside (0, 1)");
  }
  if (!(gt.width > 0.0 && gt.width <= 1.0)) {
    throw ValidationError("annotation width " + std::to_string(gt.width) + " outside (0, 1]");
  }
  const auto seg = gt.segment();
  if (seg.start < -kSegmentTolerance || seg.end > 1.0 + kSegmentTolerance) {
    throw ValidationError("annotation segment [" + std::to_string(seg.start) + ", " +
                          std::to_string(seg.end) + "] exceeds [0, 1]");
  }
  if (gt.class_id < 0 || gt.class_id >= num_classes) {
    throw ValidationError("annotation class " + std::to_string(gt.class_id) + " outside [0, " +
                          std::to_string(num_classes) + ")");
  }
}

void validate_record(const VideoRecord& video, int num_classes) {
  if (video.length < kMinVideoLength) {
    throw ValidationError("video " + video.id + " has " + std::to_string(video.length) +
                          " clips, need at least " + std::to_string(kMinVideoLength));
  }
  if (video.dim < 1) throw ValidationError("video " + video.id + " has zero feature dimension");
  if (video.features.size() != video.length * video.dim) {
    throw ValidationError("video " + video.id + " feature count does not match T x D");
  }
  for (double v : video.features) {
    if (!std::isfinite(v)) throw ValidationError("video " + video.id + " has non-finite features");
  }
  for (const auto& gt : video.annotations) validate_annotation(gt, num_classes);
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path index_path = dir / "index.json";
  std::ifstream in(index_path);
  if (!in) throw IoError("cannot open " + index_path.string());
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw ValidationError("malformed " + index_path.string() + ": " + e.what());
  }

  Dataset ds;
  ds.num_classes = required<int>(index, "num_classes", "index.json");
  if (ds.num_classes < 1) throw ValidationError("index.json: num_classes must be >= 1");
  for (const auto& entry : required<json>(index, "videos", "index.json")) {
    VideoRecord v;
    v.id = required<std::string>(entry, "id", "video entry");
    const std::string where = "video " + v.id;
    v.length = required<std::size_t>(entry, "T", where);
    v.dim = required<std::size_t>(entry, "D", where);
    v.duration_seconds = entry.value("duration_seconds", 0.0);
    for (const auto& a : entry.value("annotations", json::array())) {
      GroundTruthInstance gt;
      gt.center = required<double>(a, "center", where);
      gt.width = required<double>(a, "width", where);
      gt.class_id = required<int>(a, "class_id", where);
      v.annotations.push_back(gt);
    }
    const fs::path file = dir / required<std::string>(entry, "feature_file", where);
    v.features = read_float32(file);
    if (v.features.size() != v.length * v.dim) {
      throw ValidationError(where + ": feature file holds " + std::to_string(v.features.size()) +
                            " values, expected T x D = " + std::to_string(v.length * v.dim));
    }
    validate_record(v, ds.num_classes);
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

VideoRecord load_feature_file(const fs::path& file, std::size_t dim) {
  if (dim == 0) throw ValidationError("feature dimension must be >= 1");
  VideoRecord v;
  v.id = file.stem().string();
  v.dim = dim;
  v.features = read_float32(file);
  if (v.features.size() % dim != 0) {
    throw ValidationError(file.string() + " does not hold a whole number of " +
                          std::to_string(dim) + "-dimensional clips");
  }
  v.length = v.features.size() / dim;
  validate_record(v, 1);
  return v;
}

void save_dataset(const Dataset& dataset, const fs::path& dir, bool overwrite) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir, ec) && !overwrite) {
      throw IoError(dir.string() + " is not empty; pass overwrite to replace its contents");
    }
  } else if (!fs::create_directories(dir, ec) || ec) {
    throw IoError("cannot create " + dir.string());
  }

  json videos = json::array();
  for (const auto& v : dataset.videos) {
    validate_record(v, dataset.num_classes);
    const std::string file = v.id + ".f32";
    write_float32(dir / file, v.features);
    json annotations = json::array();
    for (const auto& a : v.annotations) {
      annotations.push_back({{"center", a.center}, {"width", a.width}, {"class_id", a.class_id}});
    }
    videos.push_back({{"id", v.id},
                      {"feature_file", file},
                      {"T", v.length},
                      {"D", v.dim},
                      {"duration_seconds", v.duration_seconds},
                      {"annotations", std::move(annotations)}});
  }
  json index = {{"num_classes", dataset.num_classes}, {"videos", std::move(videos)}};
  std::ofstream out(dir / "index.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "index.json").string());
  out << index.dump(2) << '\n';
  if (!out) throw IoError("short write to index.json");
}

// ---------------------------------------------------------------- synthetic

void SyntheticSpec::validate() const {
  if (num_videos < 1) throw ValidationError("num_videos must be >= 1");
  if (length < kMinVideoLength) throw ValidationError("T must be >= 16");
  if (dim < 1) throw ValidationError("D must be >= 1");
  if (num_classes < 1) throw ValidationError("num_classes must be >= 1");
  if (min_instances > max_instances) throw ValidationError("min_instances exceeds max_instances");
  if (!(min_width > 0.0) || !(max_width <= 1.0) || min_width > max_width) {
    throw ValidationError("widths must satisfy 0 < w_min <= w_max <= 1");
  }
  if (!(snr >= 0.0) || !std::isfinite(snr)) throw ValidationError("snr must be finite and >= 0");
}

double instance_envelope(double position, const gaussian::Segment& segment) {
  constexpr double kTaper = 0.3;  // fraction of the extent spent ramping
  const double w = segment.length();
  if (w <= 0.0 || position <= segment.start || position >= segment.end) return 0.0;
  const double u = (position - segment.start) / w;
  const double edge = std::min(u, 1.0 - u);
  if (edge >= kTaper / 2.0) return 1.0;
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * edge / kTaper));
}

std::vector<std::vector<double>> class_directions(const SyntheticSpec& spec) {
  std::mt19937_64 rng(spec.class_seed.value_or(spec.seed) ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> dirs(static_cast<std::size_t>(spec.num_classes));
  for (auto& d : dirs) {
    double norm = 0.0;
    do {
      d.assign(spec.dim, 0.0);
      norm = 0.0;
      for (auto& x : d) {
        x = normal(rng);
        norm += x * x;
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (auto& x : d) x /= norm;
  }
  return dirs;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  constexpr int kPlacementTries = 200;
  constexpr int kVideoRestarts = 20;

  const auto dirs = class_directions(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> count_dist(spec.min_instances, spec.max_instances);
  std::uniform_int_distribution<int> class_dist(0, spec.num_classes - 1);
  const double log_lo = std::log(spec.min_width), log_hi = std::log(spec.max_width);

  Dataset ds;
  ds.num_classes = spec.num_classes;
  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    const std::size_t wanted = count_dist(rng);
    std::vector<GroundTruthInstance> placed;
    bool ok = false;
    for (int restart = 0; restart < kVideoRestarts && !ok; ++restart) {
      placed.clear();
      ok = true;
      for (std::size_t n = 0; n < wanted && ok; ++n) {
        bool fitted = false;
        for (int attempt = 0; attempt < kPlacementTries && !fitted; ++attempt) {
          GroundTruthInstance gt;
          gt.width = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
          gt.width = std::min(gt.width, spec.max_width);
          const double start = (1.0 - gt.width) * unit(rng);
          gt.center = start + 0.5 * gt.width;
          gt.class_id = class_dist(rng);
          fitted = std::all_of(placed.begin(), placed.end(), [&](const GroundTruthInstance& o) {
            return gaussian::segment_iou(o.segment(), gt.segment()) <= kMaxInstanceOverlap;
          });
          if (fitted) placed.push_back(gt);
        }
        ok = fitted;
      }
    }
    if (!ok) {
      throw ValidationError("cannot place " + std::to_string(wanted) +
                            " instances under the overlap cap in video " + std::to_string(v));
    }
    std::sort(placed.begin(), placed.end(),
              [](const auto& a, const auto& b) { return a.center < b.center; });

    VideoRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "video_%05zu", v);
    rec.id = id;
    rec.length = spec.length;
    rec.dim = spec.dim;
    rec.duration_seconds = 0.5 * static_cast<double>(spec.length);
    rec.annotations = placed;
    rec.features.resize(spec.length * spec.dim);
    for (auto& x : rec.features) x = normal(rng);
    const double T = static_cast<double>(spec.length);
    for (const auto& gt : placed) {
      const auto seg = gt.segment();
      const auto& dir = dirs[static_cast<std::size_t>(gt.class_id)];
      for (std::size_t t = 0; t < spec.length; ++t) {
        const double env = instance_envelope((static_cast<double>(t) + 0.5) / T, seg);
        if (env == 0.0) continue;
        for (std::size_t d = 0; d < spec.dim; ++d) {
          rec.features[t * spec.dim + d] += spec.snr * env * dir[d];
        }
      }
    }
    for (auto& x : rec.features) x = static_cast<double>(static_cast<float>(x));
    ds.videos.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace gtan::data
