#include "dirforge/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "dirforge/config.hpp"

namespace dirforge {

using nlohmann::json;

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw CheckpointHeaderError("checkpoint has no tensor named '" + name + "'");
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = get_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  json header;
  header["meta"] = ck.meta;
  header["tensors"] = json::array();
  for (const auto& t : ck.tensors) {
    header["tensors"].push_back(
        {{"name", t.name}, {"shape", t.tensor.shape()}, {"dtype", "f32"}, {"bytes", t.tensor.numel() * 4}});
  }
  const std::string hs = header.dump();
  std::vector<std::uint8_t> out{'G', 'T', 'F', 'W'};
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(hs.size()));
  out.insert(out.end(), hs.begin(), hs.end());
  for (const auto& t : ck.tensors)
    for (double v : t.tensor.values()) put_f32(out, static_cast<float>(v));
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw CheckpointTruncated("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes, no magic");
  if (std::memcmp(bytes.data(), "GTFW", 4) != 0) throw CheckpointBadMagic("not a checkpoint: magic is not GTFW");
  if (bytes.size() < 12) throw CheckpointTruncated("checkpoint truncated inside the fixed preamble");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointVersionMismatch("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                                    std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t hlen = get_u32(bytes.data() + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw CheckpointTruncated("checkpoint truncated inside the header");
  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
  } catch (const json::exception& e) {
    throw CheckpointHeaderError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (!header.contains("tensors") || !header["tensors"].is_array())
    throw CheckpointHeaderError("checkpoint header has no tensor list");

  Checkpoint ck;
  ck.meta = header.value("meta", json::object());
  std::size_t off = 12 + hlen;
  std::size_t declared_total = 0;
  for (const auto& t : header["tensors"]) declared_total += t.value("bytes", std::size_t{0});
  if (bytes.size() < off + declared_total) {
    throw CheckpointTruncated("checkpoint truncated: payload needs " + std::to_string(declared_total) + " bytes, file has " +
                              std::to_string(bytes.size() - off));
  }
  for (const auto& t : header["tensors"]) {
    const std::string name = t.value("name", std::string{});
    if (t.value("dtype", std::string{}) != "f32") throw CheckpointHeaderError("tensor '" + name + "' is not f32");
    const Shape shape = t.at("shape").get<Shape>();
    std::size_t numel = 1;
    for (std::size_t s : shape) numel *= s;
    const std::size_t nbytes = t.value("bytes", std::size_t{0});
    if (nbytes != numel * 4) {
      throw CheckpointShapeMismatch(name, "tensor '" + name + "': shape " + shape_str(shape) + " needs " +
                                              std::to_string(numel * 4) + " bytes, header declares " + std::to_string(nbytes));
    }
    std::vector<double> v(numel);
    for (std::size_t i = 0; i < numel; ++i) v[i] = static_cast<double>(get_f32(bytes.data() + off + 4 * i));
    off += nbytes;
    ck.tensors.push_back({name, Tensor::from(shape, std::move(v))});
  }
  if (off != bytes.size()) {
    const std::string last = ck.tensors.empty() ? std::string("<none>") : ck.tensors.back().name;
    throw CheckpointShapeMismatch(last, "checkpoint has " + std::to_string(bytes.size() - off) +
                                            " bytes beyond the declared payload (after tensor '" + last + "')");
  }
  return ck;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const auto bytes = encode_checkpoint(ck);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void save_encoder(const std::filesystem::path& path, const Encoder& enc, const Provenance& prov) {
  Checkpoint ck;
  ck.meta = {{"kind", "encoder"}, {"hidden", enc.hidden()}, {"k", enc.k()}, {"normalize", enc.normalize},
             {"provenance", prov.to_json()}};
  ck.tensors = enc.params();
  write_checkpoint(path, ck);
}

Encoder load_encoder(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.meta.value("kind", "") != "encoder") throw CheckpointHeaderError(path.string() + " is not an encoder checkpoint");
  Rng rng(0);
  Encoder enc(ck.meta.at("hidden").get<std::size_t>(), ck.meta.at("k").get<std::size_t>(), rng);
  enc.normalize = ck.meta.value("normalize", true);
  auto params = enc.params();
  load_values(params, ck.tensors);
  return enc;
}

void save_model(const std::filesystem::path& path, const DiffusionModel& m, const Provenance& prov) {
  Checkpoint ck;
  const auto& c = m.net.config();
  std::vector<double> betas(m.schedule.betas.begin() + 1, m.schedule.betas.end());
  ck.meta = {{"kind", "diffusion"},
             {"hidden", c.hidden},
             {"temb", c.temb},
             {"k", c.k},
             {"T", m.schedule.T},
             {"betas", betas},
             {"data_shift", m.data.shift},
             {"data_scale", m.data.scale},
             {"provenance", prov.to_json()}};
  ck.tensors = m.params();
  write_checkpoint(path, ck);
}

DiffusionModel load_model(const std::filesystem::path& path) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.meta.value("kind", "") != "diffusion") throw CheckpointHeaderError(path.string() + " is not a diffusion checkpoint");
  DenoiserConfig c;
  c.hidden = ck.meta.at("hidden").get<std::size_t>();
  c.temb = ck.meta.at("temb").get<std::size_t>();
  c.k = ck.meta.at("k").get<std::size_t>();
  Rng rng(0);
  DiffusionModel m{NoiseSchedule::from_betas(ck.meta.at("betas").get<std::vector<double>>()), Denoiser(c, rng),
                   DataScale{ck.meta.at("data_shift").get<double>(), ck.meta.at("data_scale").get<double>()}};
  auto params = m.params();
  load_values(params, ck.tensors);
  return m;
}

void save_direction(const std::filesystem::path& path, const DirectionEmbedding& dir) {
  Checkpoint ck;
  const auto& p = dir.provenance;
  ck.meta = {{"kind", "direction"},
             {"name", dir.name},
             {"k", dir.d.size()},
             {"recommended_lambda_e", dir.recommended_lambda_e},
             {"window", {dir.window_lo, dir.window_hi}},
             {"provenance",
              {{"seed", p.world_seed},
               {"direction", p.direction},
               {"n", p.n},
               {"iterations", p.iterations},
               {"config_hash", hash_hex(p.config_hash)},
               {"w_sem", p.w_sem},
               {"w_latent", p.w_latent},
               {"version", kModuleVersion}}}};
  ck.tensors.push_back({"d", Tensor::from({dir.d.size()}, dir.d)});
  write_checkpoint(path, ck);
}

DirectionEmbedding load_direction(const std::filesystem::path& path, std::size_t expected_k) {
  const Checkpoint ck = read_checkpoint(path);
  if (ck.meta.value("kind", "") != "direction") throw CheckpointHeaderError(path.string() + " is not a direction file");
  DirectionEmbedding dir;
  dir.name = ck.meta.at("name").get<std::string>();
  dir.d = ck.get("d").values();
  if (expected_k != 0 && dir.d.size() != expected_k) {
    throw EmbeddingWidthMismatch("direction '" + dir.name + "' has k=" + std::to_string(dir.d.size()) +
                                 ", model expects k=" + std::to_string(expected_k));
  }
  dir.recommended_lambda_e = ck.meta.at("recommended_lambda_e").get<double>();
  const auto w = ck.meta.at("window");
  dir.window_lo = w.at(0).get<double>();
  dir.window_hi = w.at(1).get<double>();
  const auto& p = ck.meta.at("provenance");
  dir.provenance.world_seed = p.at("seed").get<std::uint64_t>();
  dir.provenance.direction = p.at("direction").get<std::string>();
  dir.provenance.n = p.at("n").get<std::size_t>();
  dir.provenance.iterations = p.at("iterations").get<std::size_t>();
  dir.provenance.config_hash = parse_hash_hex(p.at("config_hash").get<std::string>());
  dir.provenance.w_sem = p.at("w_sem").get<double>();
  dir.provenance.w_latent = p.at("w_latent").get<double>();
  return dir;
}

}  // namespace dirforge
