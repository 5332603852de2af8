#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dirforge/config.hpp"
#include "dirforge/direction.hpp"
#include "dirforge/encoder.hpp"
#include "dirforge/diffusion.hpp"
#include "json.hpp"

namespace dirforge {

// File layout, little-endian:
//   "GTFW" | u32 version | u32 header_bytes | JSON header | payload
// The header lists tensors as {name, shape, dtype: "f32", bytes}; the
// payload holds their float32 values back to back in header order. Free-form
// metadata (provenance, config hash, sizes) sits under header["meta"].
constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  using Error::Error;
};
class CheckpointTruncated : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointBadMagic : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionMismatch : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
// Declared shape and byte count disagree, or bytes are left over.
class CheckpointShapeMismatch : public CheckpointError {
 public:
  CheckpointShapeMismatch(const std::string& tensor, const std::string& what)
      : CheckpointError(what), tensor_name(tensor) {}
  std::string tensor_name;
};
class CheckpointHeaderError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
// Embedding width in the file differs from what the caller needs.
class EmbeddingWidthMismatch : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const Tensor& get(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_encoder(const std::filesystem::path& path, const Encoder& enc, const Provenance& prov);
Encoder load_encoder(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const DiffusionModel& m, const Provenance& prov);
DiffusionModel load_model(const std::filesystem::path& path);

// The direction's own provenance becomes meta["provenance"], with its
// world seed as the stamp seed.
void save_direction(const std::filesystem::path& path, const DirectionEmbedding& dir);
// expected_k == 0 skips the width check.
DirectionEmbedding load_direction(const std::filesystem::path& path, std::size_t expected_k = 0);

}  // namespace dirforge
