#include "mtgrid/training/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "mtgrid/common/atomic_file.hpp"

namespace mtgrid {
namespace {

constexpr std::string_view kManifestSuffix = ".manifest.json";
constexpr std::string_view kBlobSuffix = ".tensors.bin";

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void append_tensor(std::string& blob, const Tensor<float>& t) {
  const std::size_t start = blob.size();
  blob.resize(start + 4 * t.size());
  char* out = blob.data() + start;
  for (float v : t.data) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) *out++ = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
}

void read_tensor(const std::string& blob, std::size_t offset, Tensor<float>& t) {
  const auto* in = reinterpret_cast<const unsigned char*>(blob.data() + offset);
  for (float& v : t.data) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(*in++) << (8 * b);
    v = std::bit_cast<float>(bits);
  }
}

}  // namespace

std::filesystem::path manifest_path(const std::filesystem::path& prefix) {
  return std::filesystem::path(prefix.string() + std::string(kManifestSuffix));
}

std::filesystem::path blob_path(const std::filesystem::path& prefix) {
  return std::filesystem::path(prefix.string() + std::string(kBlobSuffix));
}

std::filesystem::path checkpoint_prefix(const std::filesystem::path& path) {
  std::string s = path.string();
  if (ends_with(s, kManifestSuffix)) s.resize(s.size() - kManifestSuffix.size());
  else if (ends_with(s, kBlobSuffix)) s.resize(s.size() - kBlobSuffix.size());
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto prefix = checkpoint_prefix(path);
  check_shapes(ck.params, ck.model_config);
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::string blob;
  blob.reserve(4 * ck.params.total_elements() * (ck.training_state ? 3 : 1));
  auto add_table = [&](const Parameters& table, const std::string& name_prefix) {
    for (const auto& [name, t] : table) {
      tensors.push_back({{"name", name_prefix + name},
                         {"shape", t.shape},
                         {"offset", blob.size()},
                         {"bytes", 4 * t.size()}});
      append_tensor(blob, t);
    }
  };
  add_table(ck.params, "");
  if (ck.training_state) {
    add_table(ck.training_state->m, "adam.m/");
    add_table(ck.training_state->v, "adam.v/");
  }
  nlohmann::ordered_json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["model_config"] = nlohmann::ordered_json::parse(nlohmann::json(ck.model_config).dump());
  manifest["step"] = ck.step;
  manifest["has_training_state"] = ck.training_state.has_value();
  manifest["optimizer_updates"] = ck.training_state ? ck.training_state->t : 0;
  manifest["blob_bytes"] = blob.size();
  manifest["tensors"] = std::move(tensors);
  manifest["metadata"] = nlohmann::ordered_json::parse(ck.metadata.dump());
  write_file_atomically(blob_path(prefix), blob);
  write_file_atomically(manifest_path(prefix), manifest.dump(2) + "\n");
}

nlohmann::json read_manifest(const std::filesystem::path& path) {
  const auto file = manifest_path(checkpoint_prefix(path));
  try {
    return nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError("unreadable manifest " + file.string() + ": " + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto prefix = checkpoint_prefix(path);
  const auto manifest = read_manifest(prefix);
  const std::string where = manifest_path(prefix).string();
  Checkpoint ck;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                   " is not supported (expected " +
                                   std::to_string(kCheckpointFormatVersion) + "): " + where);
    }
    ck.model_config = manifest.at("model_config").get<ModelConfig>();
    ck.step = manifest.at("step").get<std::int64_t>();
    if (manifest.contains("metadata")) ck.metadata = manifest.at("metadata");
    const bool has_state = manifest.at("has_training_state").get<bool>();
    const auto blob_bytes = manifest.at("blob_bytes").get<std::size_t>();
    const auto& entries = manifest.at("tensors");

    std::size_t expected_offset = 0;
    for (const auto& e : entries) {
      const auto offset = e.at("offset").get<std::size_t>();
      const auto bytes = e.at("bytes").get<std::size_t>();
      std::size_t elems = 1;
      for (int d : e.at("shape").get<std::vector<int>>()) {
        if (d < 1) throw ManifestInconsistentError("manifest inconsistent: bad shape in " + where);
        elems *= static_cast<std::size_t>(d);
      }
      if (offset != expected_offset || bytes != 4 * elems) {
        throw ManifestInconsistentError("manifest inconsistent: tensor " +
                                        e.at("name").get<std::string>() + " offset table in " +
                                        where);
      }
      expected_offset += bytes;
    }
    if (expected_offset != blob_bytes) {
      throw ManifestInconsistentError("manifest inconsistent: tensor bytes do not sum to blob size in " + where);
    }

    const auto model_table = make_parameter_table<float>(ck.model_config);
    const std::size_t n_model = model_table.count();
    const std::size_t n_expected = has_state ? 3 * n_model : n_model;
    if (entries.size() != n_expected) {
      throw CheckpointShapeError("checkpoint holds " + std::to_string(entries.size()) +
                                 " tensors, model config expects " + std::to_string(n_expected) +
                                 ": " + where);
    }
    auto expected_name = [&](std::size_t i) {
      const std::string& base = model_table.name(i % n_model);
      if (i < n_model) return base;
      return (i < 2 * n_model ? "adam.m/" : "adam.v/") + base;
    };
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.at("name").get<std::string>() != expected_name(i) ||
          e.at("shape").get<std::vector<int>>() != model_table[i % n_model].shape) {
        throw CheckpointShapeError("tensor " + expected_name(i) +
                                   " shape mismatch against model config: " + where);
      }
    }

    const std::string blob = read_file(blob_path(prefix));
    if (blob.size() < blob_bytes) {
      throw CheckpointTruncatedError("truncated tensor blob: " + std::to_string(blob.size()) +
                                     " of " + std::to_string(blob_bytes) + " bytes in " +
                                     blob_path(prefix).string());
    }
    if (blob.size() > blob_bytes) {
      throw ManifestInconsistentError("manifest inconsistent: blob larger than the offset table in " +
                                      blob_path(prefix).string());
    }

    ck.params = model_table;
    if (has_state) {
      AdamState state = make_adam_state(ck.params);
      state.t = manifest.at("optimizer_updates").get<std::int64_t>();
      ck.training_state = std::move(state);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto offset = entries[i].at("offset").get<std::size_t>();
      Tensor<float>& t = i < n_model       ? ck.params[i]
                         : i < 2 * n_model ? ck.training_state->m[i - n_model]
                                           : ck.training_state->v[i - 2 * n_model];
      read_tensor(blob, offset, t);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointFormatError("malformed manifest " + where + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw CheckpointShapeError(std::string(e.what()) + ": " + where);
  }
  return ck;
}

}  // namespace mtgrid
