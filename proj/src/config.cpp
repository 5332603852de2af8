#include "dirforge/config.hpp"

#include <cstdio>
#include <fstream>

namespace dirforge {

using nlohmann::json;

void RunConfig::finalize() {
  encoder.seed = seed;
  diffusion.seed = seed;
  transfer.seed = seed;
  denoiser.k = encoder.k;
}

NoiseSchedule RunConfig::schedule() const { return NoiseSchedule::linear(T, beta_lo, beta_hi); }

json to_json(const RunConfig& c) {
  return {
      {"seed", c.seed},
      {"schedule", {{"T", c.T}, {"beta_lo", c.beta_lo}, {"beta_hi", c.beta_hi}}},
      {"encoder",
       {{"hidden", c.encoder.hidden},
        {"k", c.encoder.k},
        {"train_samples", c.encoder.train_samples},
        {"epochs", c.encoder.epochs},
        {"batch", c.encoder.batch},
        {"lr", c.encoder.lr}}},
      {"denoiser", {{"hidden", c.denoiser.hidden}, {"temb", c.denoiser.temb}}},
      {"diffusion",
       {{"steps", c.diffusion.steps},
        {"batch", c.diffusion.batch},
        {"lr", c.diffusion.lr},
        {"p_uncond", c.diffusion.p_uncond},
        {"ema", c.diffusion.ema}}},
      {"transfer",
       {{"n", c.transfer.n},
        {"batch", c.transfer.batch},
        {"iterations", c.transfer.iterations},
        {"lr", c.transfer.lr},
        {"weight_decay", c.transfer.weight_decay},
        {"t_lo", c.transfer.t_lo},
        {"t_hi", c.transfer.t_hi},
        {"w_sem", c.transfer.w_sem},
        {"w_latent", c.transfer.w_latent},
        {"init_scale", c.transfer.init_scale},
        {"clip", c.transfer.clip},
        {"clip_norm", c.transfer.clip_norm},
        {"norm_ceiling", c.transfer.norm_ceiling}}},
      {"edit", {{"lambda_g", c.lambda_g}, {"window", {c.window_lo, c.window_hi}}}},
      {"eval",
       {{"M", c.eval.M},
        {"calib_M", c.eval.calib_M},
        {"calib_target", c.eval.calib_target},
        {"lambda_grid", c.eval.lambda_grid},
        {"interp_grid", c.eval.interp_grid},
        {"interp_rows", c.eval.interp_rows},
        {"ablation_direction", c.eval.ablation_direction},
        {"composition", c.eval.composition},
        {"noise_floor", c.eval.noise_floor}}},
      {"out_root", c.out_root},
  };
}

namespace {

void check_keys(const json& defaults, const json& given, const std::string& path) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw InvalidArgument("unknown config key '" + key + "'");
    if (defaults[it.key()].is_object()) check_keys(defaults[it.key()], it.value(), key);
  }
}

}  // namespace

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  json merged = to_json(RunConfig{});
  check_keys(merged, j, "");
  merged.merge_patch(j);
  RunConfig c;
  try {
    c.seed = merged["seed"].get<std::uint64_t>();
    const auto& s = merged["schedule"];
    c.T = s["T"].get<int>();
    c.beta_lo = s["beta_lo"].get<double>();
    c.beta_hi = s["beta_hi"].get<double>();
    const auto& e = merged["encoder"];
    c.encoder.hidden = e["hidden"].get<std::size_t>();
    c.encoder.k = e["k"].get<std::size_t>();
    c.encoder.train_samples = e["train_samples"].get<std::size_t>();
    c.encoder.epochs = e["epochs"].get<std::size_t>();
    c.encoder.batch = e["batch"].get<std::size_t>();
    c.encoder.lr = e["lr"].get<double>();
    c.denoiser.hidden = merged["denoiser"]["hidden"].get<std::size_t>();
    c.denoiser.temb = merged["denoiser"]["temb"].get<std::size_t>();
    const auto& d = merged["diffusion"];
    c.diffusion.steps = d["steps"].get<std::size_t>();
    c.diffusion.batch = d["batch"].get<std::size_t>();
    c.diffusion.lr = d["lr"].get<double>();
    c.diffusion.p_uncond = d["p_uncond"].get<double>();
    c.diffusion.ema = d["ema"].get<double>();
    const auto& t = merged["transfer"];
    c.transfer.n = t["n"].get<std::size_t>();
    c.transfer.batch = t["batch"].get<std::size_t>();
    c.transfer.iterations = t["iterations"].get<std::size_t>();
    c.transfer.lr = t["lr"].get<double>();
    c.transfer.weight_decay = t["weight_decay"].get<double>();
    c.transfer.t_lo = t["t_lo"].get<int>();
    c.transfer.t_hi = t["t_hi"].get<int>();
    c.transfer.w_sem = t["w_sem"].get<double>();
    c.transfer.w_latent = t["w_latent"].get<double>();
    c.transfer.init_scale = t["init_scale"].get<double>();
    c.transfer.clip = t["clip"].get<bool>();
    c.transfer.clip_norm = t["clip_norm"].get<double>();
    c.transfer.norm_ceiling = t["norm_ceiling"].get<double>();
    c.lambda_g = merged["edit"]["lambda_g"].get<double>();
    c.window_lo = merged["edit"]["window"].at(0).get<double>();
    c.window_hi = merged["edit"]["window"].at(1).get<double>();
    const auto& v = merged["eval"];
    c.eval.M = v["M"].get<std::size_t>();
    c.eval.calib_M = v["calib_M"].get<std::size_t>();
    c.eval.calib_target = v["calib_target"].get<double>();
    c.eval.lambda_grid = v["lambda_grid"].get<std::vector<double>>();
    c.eval.interp_grid = v["interp_grid"].get<std::vector<double>>();
    c.eval.interp_rows = v["interp_rows"].get<std::size_t>();
    c.eval.ablation_direction = v["ablation_direction"].get<std::string>();
    c.eval.composition = v["composition"].get<std::vector<std::string>>();
    c.eval.noise_floor = v["noise_floor"].get<double>();
    c.out_root = merged["out_root"].get<std::string>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.finalize();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& c) {
  json j = to_json(c);
  // Where outputs land does not change what they contain.
  j.erase("out_root");
  return fnv1a64(j.dump());
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t parse_hash_hex(const std::string& s) {
  if (s.size() != 16 || s.find_first_not_of("0123456789abcdef") != std::string::npos)
    throw InvalidArgument("malformed hash '" + s + "'");
  return std::stoull(s, nullptr, 16);
}

nlohmann::json Provenance::to_json() const {
  return {{"config_hash", hash_hex(config_hash)}, {"seed", seed}, {"version", version}};
}

std::string Provenance::line() const {
  return "config_hash=" + hash_hex(config_hash) + " seed=" + std::to_string(seed) + " version=" + version;
}

Provenance provenance_of(const RunConfig& c) { return Provenance{config_hash(c), c.seed, kModuleVersion}; }

}  // namespace dirforge
