// Copyright 2026 The gtan Authors
// SPDX-License-Identifier: Apache-2.0

#include "gtan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gtan/config.hpp"
#include "gtan/errors.hpp"

namespace gtan::checkpoint {

namespace {

using json = nlohmann::json;
constexpr char kMagic[4] = {'G', 'T', 'A', 'N'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

class ByteReader {
 public:
  explicit ByteReader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return read(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read(4)); }
  double f64() { return std::bit_cast<double>(read(8)); }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ValidationError("checkpoint is truncated");
  }
  std::uint64_t read(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int b = 0; b < n; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

json sgd_to_json(const training::SgdConfig& s) {
  return {{"learning_rate", s.learning_rate},
          {"momentum", s.momentum},
          {"weight_decay", s.weight_decay},
          {"decay_interval", s.decay_interval},
          {"decay_factor", s.decay_factor}};
}

training::SgdConfig sgd_from_json(const json& j) {
  training::SgdConfig s;
  s.learning_rate = j.at("learning_rate").get<double>();
  s.momentum = j.at("momentum").get<double>();
  s.weight_decay = j.at("weight_decay").get<double>();
  s.decay_interval = j.at("decay_interval").get<std::uint64_t>();
  s.decay_factor = j.at("decay_factor").get<double>();
  return s;
}

}  // namespace

std::uint64_t network_digest(const network::NetworkConfig& net) {
  const std::string text = config::network_to_json(net).dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void save(const std::filesystem::path& file, const Checkpoint& cp) {
  json params = json::array();
  for (const auto& p : cp.params.entries()) {
    params.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  }
  json manifest = {{"network", config::network_to_json(cp.network)},
                   {"params", std::move(params)},
                   {"run_config", cp.run_config}};
  if (cp.training) {
    const auto& t = *cp.training;
    manifest["training"] = {{"step", t.optimizer.step},
                            {"epoch", t.progress.epoch},
                            {"skipped_steps", t.progress.skipped_steps},
                            {"learning_rate", t.optimizer.current_learning_rate()},
                            {"sgd", sgd_to_json(t.optimizer.config)}};
  } else {
    manifest["training"] = nullptr;
  }
  const std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put_u32(out, kFormatVersion);
  put_u64(out, network_digest(cp.network));
  put_u64(out, text.size());
  out += text;
  auto put_values = [&](std::span<const double> values) {
    for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  };
  for (const auto& p : cp.params.entries()) put_values(p.tensor.values());
  if (cp.training) {
    if (cp.training->optimizer.velocity.size() != cp.params.size()) {
      throw ValidationError("optimizer state does not match the parameters");
    }
    for (const auto& v : cp.training->optimizer.velocity) put_values(v);
  }

  std::filesystem::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + file.string());
}

Checkpoint load(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + file.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  ByteReader in(bytes);
  if (in.take(4) != std::string(kMagic, 4)) throw ValidationError(file.string() + " is not a checkpoint");
  if (const auto v = in.u32(); v != kFormatVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(v));
  }
  const std::uint64_t digest = in.u64();
  const std::uint64_t manifest_size = in.u64();
  json manifest;
  try {
    manifest = json::parse(in.take(manifest_size));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corrupt checkpoint manifest: ") + e.what());
  }

  Checkpoint cp;
  try {
    cp.network = config::network_from_json(manifest.at("network"));
    cp.run_config = manifest.at("run_config");
    if (network_digest(cp.network) != digest) {
      throw ValidationError("checkpoint network digest mismatch");
    }
    const auto expected = network::Network(cp.network).parameter_layout();
    const auto& listed = manifest.at("params");
    if (listed.size() != expected.size()) {
      throw ValidationError("checkpoint parameter list does not match its network");
    }
    for (std::size_t i = 0; i < listed.size(); ++i) {
      const auto name = listed[i].at("name").get<std::string>();
      const auto shape = listed[i].at("shape").get<ad::Shape>();
      const auto& want = expected[i];
      if (name != want.first || shape != want.second) {
        throw ValidationError("checkpoint parameter " + name + " does not match its network");
      }
      auto& t = cp.params.add(name, shape);
      for (auto& v : t.values_mut()) v = in.f64();
    }
    if (!manifest.at("training").is_null()) {
      const auto& tj = manifest.at("training");
      TrainingState state;
      state.optimizer = training::OptimizerState::create(cp.params, sgd_from_json(tj.at("sgd")));
      state.optimizer.step = tj.at("step").get<std::uint64_t>();
      state.progress.epoch = tj.at("epoch").get<std::uint64_t>();
      state.progress.skipped_steps = tj.at("skipped_steps").get<std::uint64_t>();
      for (auto& buffer : state.optimizer.velocity) {
        for (auto& v : buffer) v = in.f64();
      }
      cp.training = std::move(state);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  if (!in.done()) throw ValidationError("checkpoint has trailing bytes");
  return cp;
}

}  // namespace gtan::checkpoint
