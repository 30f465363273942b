#pragma once

// Checkpoint container "ckpt-v1":
//   8 bytes   magic "ckpt-v1\n"
//   8 bytes   header length N (uint64, little endian)
//   N bytes   JSON header {version, config, training_log, best_epoch, tensors:[{name, shape, offset}]}
//   rest      float32 little-endian parameter data; offsets count floats

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmconcept/nn/config.hpp"
#include "mmconcept/nn/transformer.hpp"

namespace mmconcept::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
};

struct NamedArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<NamedArray> parameters;
  std::vector<EpochLog> training_log;
  std::size_t best_epoch = 0;
};

inline constexpr std::string_view kCheckpointMagic = "ckpt-v1\n";

template <typename T>
std::vector<NamedArray> export_parameters(const MaskedLM<T>& model) {
  std::vector<NamedArray> out;
  model.params().visit([&](const std::string& name, const Param<T>& p) {
    NamedArray a{name, {static_cast<std::size_t>(p.value.rows()), static_cast<std::size_t>(p.value.cols())}, {}};
    a.data.resize(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) a.data[static_cast<std::size_t>(i)] = static_cast<float>(p.value.data()[i]);
    out.push_back(std::move(a));
  });
  return out;
}

template <typename T>
MaskedLM<T> model_from_checkpoint(const Checkpoint& ckpt) {
  MaskedLM<T> model(ckpt.config, ckpt.config.seed);
  std::size_t i = 0;
  model.params().visit([&](const std::string& name, Param<T>& p) {
    if (i >= ckpt.parameters.size()) throw std::runtime_error("checkpoint: missing tensor '" + name + "'");
    const auto& a = ckpt.parameters[i++];
    if (a.name != name) throw std::runtime_error("checkpoint: expected tensor '" + name + "', found '" + a.name + "'");
    if (a.shape.size() != 2 || a.shape[0] != static_cast<std::size_t>(p.value.rows()) ||
        a.shape[1] != static_cast<std::size_t>(p.value.cols()))
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "'");
    for (Eigen::Index k = 0; k < p.value.size(); ++k) p.value.data()[k] = static_cast<T>(a.data[static_cast<std::size_t>(k)]);
  });
  if (i != ckpt.parameters.size()) throw std::runtime_error("checkpoint: unexpected extra tensors");
  return model;
}

inline nlohmann::json log_to_json(const std::vector<EpochLog>& log) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : log) {
    nlohmann::json row{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
    row["validation_loss"] = std::isnan(e.validation_loss) ? nlohmann::json(nullptr) : nlohmann::json(e.validation_loss);
    j.push_back(std::move(row));
  }
  return j;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["version"] = "ckpt-v1";
  header["config"] = ckpt.config;
  header["training_log"] = log_to_json(ckpt.training_log);
  header["best_epoch"] = ckpt.best_epoch;
  header["tensors"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& a : ckpt.parameters) {
    header["tensors"].push_back({{"name", a.name}, {"shape", a.shape}, {"offset", offset}});
    offset += a.data.size();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : ckpt.parameters)
    out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing checkpoint " + path.string());
  std::string magic(kCheckpointMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!in || magic != kCheckpointMagic) throw std::runtime_error("not a ckpt-v1 file: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1ull << 30)) throw std::runtime_error("corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  const auto header = nlohmann::json::parse(text);

  Checkpoint ckpt;
  ckpt.config = header.at("config").get<ModelConfig>();
  ckpt.best_epoch = header.value("best_epoch", std::size_t{0});
  for (const auto& row : header.at("training_log")) {
    EpochLog e;
    e.epoch = row.at("epoch").get<std::size_t>();
    e.train_loss = row.at("train_loss").get<double>();
    if (!row.at("validation_loss").is_null()) e.validation_loss = row.at("validation_loss").get<double>();
    ckpt.training_log.push_back(e);
  }
  for (const auto& t : header.at("tensors")) {
    NamedArray a{t.at("name").get<std::string>(), t.at("shape").get<std::vector<std::size_t>>(), {}};
    std::size_t count = 1;
    for (auto s : a.shape) count *= s;
    a.data.resize(count);
    in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint data: " + path.string());
    ckpt.parameters.push_back(std::move(a));
  }
  return ckpt;
}

}  // namespace mmconcept::nn
