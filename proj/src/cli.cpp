#include "dirforge/cli.hpp"

#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dirforge/checkpoint.hpp"
#include "dirforge/pipeline.hpp"

namespace dirforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> directions;
  std::vector<double> lambda_e;
  std::string window;
  std::optional<double> lambda_g;
  std::optional<std::size_t> n;
  std::optional<std::size_t> iters;
  std::string model;
  std::string encoder;
  std::string name = "radius";
  std::string input;
  std::string in;
  std::string axis;
  std::optional<double> w_sem;
  std::optional<double> w_latent;
  bool paper_defaults = false;
};

std::array<double, 2> parse_window(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw UsageError("--window: expected lo,hi but got '" + s + "'");
  try {
    std::size_t used = 0;
    const double lo = std::stod(s.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("lo");
    const std::string rest = s.substr(comma + 1);
    const double hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("hi");
    if (!(lo >= 0.0 && lo < hi && hi <= 1.0)) throw UsageError("--window: need 0 <= lo < hi <= 1, got '" + s + "'");
    return {lo, hi};
  } catch (const std::invalid_argument&) {
    throw UsageError("--window: expected two numbers lo,hi but got '" + s + "'");
  }
}

void check_name(const std::string& name) {
  for (const auto& g : world::registry())
    if (g.name == name) return;
  std::string known;
  for (const auto& g : world::registry()) known += (known.empty() ? "" : ", ") + g.name;
  throw UsageError("--name: unknown direction '" + name + "' (registered: " + known + ")");
}

RunConfig make_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.paper_defaults) {
    c.transfer.lr = 5e-3;
    c.transfer.batch = 8;
    c.transfer.iterations = 1000;
    c.transfer.n = 100;
    c.seed = 0;
  }
  if (o.seed) c.seed = *o.seed;
  if (o.lambda_g) c.lambda_g = *o.lambda_g;
  if (!o.window.empty()) {
    const auto w = parse_window(o.window);
    c.window_lo = w[0];
    c.window_hi = w[1];
  }
  c.finalize();
  return c;
}

fs::path out_dir(const Options& o, const RunConfig& c) {
  if (!o.out.empty()) return o.out;
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);
  return fs::path(c.out_root) / (std::string(stamp) + "-" + hash_hex(config_hash(c)));
}

struct Loaded {
  Encoder enc;
  DiffusionModel model;
};

Loaded load_models(const Options& o) {
  Encoder enc = load_encoder(o.encoder);
  DiffusionModel m = load_model(o.model);
  if (enc.k() != m.k()) {
    throw EmbeddingWidthMismatch("encoder k=" + std::to_string(enc.k()) + " but model k=" + std::to_string(m.k()));
  }
  return {std::move(enc), std::move(m)};
}

std::vector<DirectionEmbedding> load_directions(const Options& o, const RunConfig& c, std::size_t k) {
  if (!o.lambda_e.empty() && o.lambda_e.size() != o.directions.size()) {
    throw UsageError("--lambda-e: given " + std::to_string(o.lambda_e.size()) + " values for " +
                     std::to_string(o.directions.size()) + " --direction files");
  }
  std::vector<DirectionEmbedding> out;
  for (std::size_t i = 0; i < o.directions.size(); ++i) {
    DirectionEmbedding d = load_direction(o.directions[i], k);
    if (!o.lambda_e.empty()) d.recommended_lambda_e = o.lambda_e[i];
    if (!o.window.empty()) {
      d.window_lo = c.window_lo;
      d.window_hi = c.window_hi;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<double> lambdas_of(const std::vector<DirectionEmbedding>& dirs) {
  std::vector<double> out;
  for (const auto& d : dirs) out.push_back(d.recommended_lambda_e);
  return out;
}

std::vector<std::vector<double>> first_rows(const Tensor& t, std::size_t n) {
  auto rows = unstack_rows(t);
  if (rows.size() > n) rows.resize(n);
  return rows;
}

void save_images(ArtifactTree& tree, const std::string& stem, const Tensor& images) {
  Checkpoint ck;
  ck.meta = {{"kind", "images"}, {"side", world::kSide}, {"provenance", tree.provenance().to_json()}};
  ck.tensors.push_back({"images", images});
  write_checkpoint(tree.root() / (stem + ".gtfw"), ck);
  tree.record(stem + ".gtfw", "images");
  tree.write(stem + ".pgm", pgm_tiles(first_rows(images, 64), world::kSide, 8, world::kPixelMax, tree.provenance()),
             "image");
}

json attributes_json(const Tensor& images) {
  json rows = json::array();
  for (const auto& img : unstack_rows(images)) {
    const auto e = world::read_attributes(img);
    json r = json::object();
    for (std::size_t a = 0; a < world::kAttrs; ++a) r[std::string(world::attr_names()[a])] = e.s[a];
    rows.push_back({{"estimate", r}, {"confidence", e.confidence}});
  }
  return rows;
}

std::vector<std::string> finish(ArtifactTree& tree) {
  tree.finish();
  std::vector<std::string> out;
  for (const auto& f : tree.files()) out.push_back((tree.root() / f).string());
  out.push_back((tree.root() / "index.json").string());
  return out;
}

using Handler = std::function<std::vector<std::string>(const Options&, std::ostream& err)>;

std::vector<std::string> cmd_world_gen(const Options& o, std::ostream&) {
  RunConfig c = make_config(o);
  const std::size_t n = o.n.value_or(c.transfer.n);
  if (n == 0) throw UsageError("--n: need at least one pair");
  check_name(o.name);
  const auto& dir = world::find_direction(o.name);
  const auto pairs = world::make_pairs(c.seed, n, dir);
  ArtifactTree tree(out_dir(o, c), provenance_of(c));
  std::string payload;
  payload.reserve(n * 2 * world::kPixels * 4);
  auto put = [&](double v) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int i = 0; i < 4; ++i) payload += static_cast<char>((bits >> (8 * i)) & 0xff);
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : pairs.input[i]) put(v);
    for (double v : pairs.edited[i]) put(v);
  }
  tree.write("pairs.f32", payload, "payload");
  json ranges = json::object();
  for (std::size_t a = 0; a < world::kAttrs; ++a)
    ranges[std::string(world::attr_names()[a])] = {world::ranges()[a].lo, world::ranges()[a].hi};
  json reg = json::array();
  for (const auto& g : world::registry())
    reg.push_back({{"name", g.name}, {"delta", g.delta}, {"nominal_scale", g.nominal_scale},
                   {"target", world::attr_names()[g.target]}});
  json styles = json::array();
  for (std::size_t i = 0; i < n; ++i) styles.push_back({{"input", pairs.styles[i].v}, {"edited", pairs.edited_styles[i].v}});
  tree.write_json("meta.json",
                  {{"n", n},
                   {"direction", dir.name},
                   {"seed", c.seed},
                   {"side", world::kSide},
                   {"layout", "pairs.f32: little-endian float32 [N, 2, 256]; index 0 input, 1 edited"},
                   {"ranges", ranges},
                   {"registry", reg},
                   {"styles", styles}},
                  "meta");
  return finish(tree);
}

std::vector<std::string> cmd_train_encoder(const Options& o, std::ostream& err) {
  RunConfig c = make_config(o);
  if (o.iters) c.encoder.epochs = *o.iters;
  if (o.n) c.encoder.train_samples = *o.n;
  const Provenance prov = provenance_of(c);
  ArtifactTree tree(out_dir(o, c), prov);
  EncoderTrainLog log;
  const Encoder enc = train_encoder_for(c, &log, [&](const std::string& s) { err << "[dirforge] " << s << "\n"; });
  save_encoder(tree.root() / "encoder.gtfw", enc, prov);
  tree.record("encoder.gtfw", "checkpoint");
  const auto r2 = probe_r2(enc, c.seed);
  json r2j = json::object();
  for (std::size_t a = 0; a < world::kAttrs; ++a) r2j[std::string(world::attr_names()[a])] = r2[a];
  tree.write_json("encoder_training.json", {{"epoch_loss", log.epoch_loss}, {"probe_r2", r2j}}, "report");
  return finish(tree);
}

std::vector<std::string> cmd_train_diffusion(const Options& o, std::ostream& err) {
  RunConfig c = make_config(o);
  if (o.iters) c.diffusion.steps = *o.iters;
  const Encoder enc = load_encoder(o.encoder);
  c.encoder.k = enc.k();
  c.finalize();
  const Provenance prov = provenance_of(c);
  ArtifactTree tree(out_dir(o, c), prov);
  DiffusionTrainLog log;
  const DiffusionModel m = train_model_for(c, enc, &log, [&](const std::string& s) { err << "[dirforge] " << s << "\n"; });
  save_model(tree.root() / "diffusion.gtfw", m, prov);
  tree.record("diffusion.gtfw", "checkpoint");
  std::vector<double> xs;
  for (std::size_t i = 0; i < log.window_loss.size(); ++i) xs.push_back(static_cast<double>((i + 1) * log.window));
  tree.write_json("diffusion_training.json",
                  {{"window_loss", log.window_loss}, {"window", log.window}, {"initial_loss", log.initial_loss},
                   {"final_loss", log.final_loss}},
                  "report");
  tree.write("diffusion_training.svg", line_svg("denoiser training loss", xs, {"window mean"}, {log.window_loss}, prov),
             "chart");
  return finish(tree);
}

std::vector<std::string> cmd_direction_learn(const Options& o, std::ostream& err) {
  RunConfig c = make_config(o);
  if (o.iters) c.transfer.iterations = *o.iters;
  if (o.n) c.transfer.n = *o.n;
  if (o.w_sem) c.transfer.w_sem = *o.w_sem;
  if (o.w_latent) c.transfer.w_latent = *o.w_latent;
  check_name(o.name);
  const Loaded L = load_models(o);
  ArtifactTree tree(out_dir(o, c), provenance_of(c));
  LearnLog log;
  err << "[dirforge] learning direction " << o.name << "\n";
  DirectionEmbedding d =
      learn_registered(c, L.model, L.enc, o.name, c.transfer.n, c.transfer.w_sem, c.transfer.w_latent, &log);
  if (!o.lambda_e.empty()) {
    d.recommended_lambda_e = o.lambda_e.front();
  } else {
    const EvalContext calib = make_eval_context(L.model, L.enc, c.eval.calib_M, c.seed + 1, c.lambda_g);
    d.recommended_lambda_e = calibrate_lambda_e(calib, d, c.eval.lambda_grid, c.eval.calib_target);
  }
  for (const auto& w : log.warnings) err << "[dirforge] warning: " << w << "\n";
  save_direction(tree.root() / (d.name + ".gtd"), d);
  tree.record(d.name + ".gtd", "direction");
  tree.write_json(d.name + "_learning.json",
                  {{"loss", log.loss}, {"semantic", log.semantic}, {"latent", log.latent}, {"d_norm", log.d_norm},
                   {"warnings", log.warnings}, {"recommended_lambda_e", d.recommended_lambda_e}},
                  "report");
  return finish(tree);
}

std::vector<std::string> cmd_sample(const Options& o, std::ostream&) {
  RunConfig c = make_config(o);
  const Loaded L = load_models(o);
  ArtifactTree tree(out_dir(o, c), provenance_of(c));
  const EvalContext ctx = make_eval_context(L.model, L.enc, o.n.value_or(16), c.seed, c.lambda_g);
  save_images(tree, "samples", ctx.base_images);
  tree.write_json("samples.json", {{"lambda_g", c.lambda_g}, {"attributes", attributes_json(ctx.base_images)}}, "report");
  return finish(tree);
}

std::vector<std::string> cmd_edit(const Options& o, std::ostream&) {
  RunConfig c = make_config(o);
  const Loaded L = load_models(o);
  const auto dirs = load_directions(o, c, L.model.k());
  ArtifactTree tree(out_dir(o, c), provenance_of(c));
  const EvalContext ctx = make_eval_context(L.model, L.enc, o.n.value_or(16), c.seed, c.lambda_g);
  std::vector<Edit> edits;
  json ej = json::array();
  for (const auto& d : dirs) {
    edits.push_back(make_edit(d, d.recommended_lambda_e));
    ej.push_back({{"direction", d.name}, {"lambda_e", d.recommended_lambda_e}, {"window", {d.window_lo, d.window_hi}}});
  }
  const CellResult cell = evaluate_edits(ctx, edits);
  save_images(tree, "unedited", ctx.base_images);
  save_images(tree, "edited", cell.images);
  json shift = json::object();
  for (std::size_t a = 0; a < world::kAttrs; ++a) shift[std::string(world::attr_names()[a])] = cell.shift[a];
  tree.write_json("edit.json",
                  {{"edits", ej}, {"lambda_g", c.lambda_g}, {"mean_normalized_shift", shift}, {"valid", cell.valid},
                   {"undetected", cell.undetected},
                   {"distance", {{"pixel_l2", cell.distance.pixel_l2}, {"embedding_l2", cell.distance.embedding_l2}}}},
                  "report");
  return finish(tree);
}

std::vector<std::string> cmd_edit_real(const Options& o, std::ostream&) {
  RunConfig c = make_config(o);
  const Loaded L = load_models(o);
  const auto dirs = load_directions(o, c, L.model.k());
  ArtifactTree tree(out_dir(o, c), provenance_of(c));
  Tensor x0;
  if (!o.input.empty()) {
    x0 = read_checkpoint(o.input).get("images");
  } else {
    std::vector<world::Image> imgs;
    for (std::size_t i = 0; i < o.n.value_or(16); ++i) {
      Rng rng(c.seed, (std::uint64_t{1} << 41) + i);
      imgs.push_back(world::render(world::sample_style(rng)));
    }
    x0 = stack_rows(imgs);
  }
  EditSpec spec;
  for (const auto& d : dirs) spec.edits.push_back(make_edit(d, d.recommended_lambda_e));
  const Tensor edited = edit_real(L.model, x0, spec, c.seed);
  const Tensor recon = edit_real(L.model, x0, EditSpec{}, c.seed);
  double max_err = 0.0;
  for (std::size_t i = 0; i < x0.numel(); ++i) max_err = std::max(max_err, std::abs(recon.at(i) - x0.at(i)));
  save_images(tree, "input", x0);
  save_images(tree, "edited", edited);
  const DistanceReport dist = distance_report(L.enc, x0, edited, "edit-real");
  tree.write_json("edit_real.json",
                  {{"reconstruction_max_abs_error", max_err},
                   {"distance", {{"pixel_l2", dist.pixel_l2}, {"embedding_l2", dist.embedding_l2}}},
                   {"attributes_input", attributes_json(x0)},
                   {"attributes_edited", attributes_json(edited)}},
                  "report");
  return finish(tree);
}

std::vector<std::string> cmd_interp(const Options& o, std::ostream&) {
  RunConfig c = make_config(o);
  const Loaded L = load_models(o);
  const auto dirs = load_directions(o, c, L.model.k());
  if (dirs.size() != 1) throw UsageError("--direction: interp takes exactly one direction");
  const Provenance prov = provenance_of(c);
  ArtifactTree tree(out_dir(o, c), prov);
  const std::size_t rows = o.n.value_or(16);
  const EvalContext ctx = make_eval_context(L.model, L.enc, rows, c.seed, c.lambda_g);
  const auto& d = dirs.front();
  const auto ip = interpolate_edit(L.model, c.seed, rows, ctx.base_c, c.lambda_g, d, c.eval.interp_grid, d.window_lo,
                                   d.window_hi);
  const std::string target = d.provenance.direction.empty() ? d.name : d.provenance.direction;
  ReportBundle b = interpolation_bundle(ip, d.name, d.window_lo, d.window_hi, prov);
  const auto mc = monotone_trace(ip, world::find_direction(target).target, c.eval.noise_floor);
  b.data["target_trace"] = mc.trace;
  b.data["monotone"] = mc.monotone;
  emit_report({b}, tree);
  std::vector<std::vector<double>> strip;
  for (std::size_t r = 0; r < std::min<std::size_t>(rows, 8); ++r)
    for (const auto& imgs : ip.images) strip.push_back(unstack_rows(imgs)[r]);
  tree.write("interpolation.pgm", pgm_tiles(strip, world::kSide, ip.grid.size(), world::kPixelMax, prov), "image");
  return finish(tree);
}

std::vector<std::string> cmd_eval_rescoring(const Options& o, std::ostream&) {
  RunConfig c = make_config(o);
  const Loaded L = load_models(o);
  const auto dirs = load_directions(o, c, L.model.k());
  const Provenance prov = provenance_of(c);
  ArtifactTree tree(out_dir(o, c), prov);
  const EvalContext ctx = make_eval_context(L.model, L.enc, o.n.value_or(c.eval.M), c.seed, c.lambda_g);
  RescoringMatrix r = rescoring(ctx, dirs, lambdas_of(dirs));
  r.config_hash = prov.config_hash;
  emit_report({rescoring_bundle(r, prov)}, tree);
  return finish(tree);
}

std::vector<std::string> cmd_eval_distance(const Options& o, std::ostream&) {
  RunConfig c = make_config(o);
  const Loaded L = load_models(o);
  const auto dirs = load_directions(o, c, L.model.k());
  const Provenance prov = provenance_of(c);
  ArtifactTree tree(out_dir(o, c), prov);
  const EvalContext ctx = make_eval_context(L.model, L.enc, o.n.value_or(c.eval.M), c.seed, c.lambda_g);
  std::vector<DistanceReport> reports;
  for (const auto& d : dirs) {
    DistanceReport r = evaluate_edits(ctx, {make_edit(d, d.recommended_lambda_e)}).distance;
    r.label = d.name + " [" + fmt_num(d.window_lo) + "," + fmt_num(d.window_hi) + "]";
    r.config_hash = prov.config_hash;
    reports.push_back(r);
  }
  emit_report({distance_bundle("distances", reports, prov)}, tree);
  return finish(tree);
}

std::vector<std::string> cmd_ablate(const Options& o, std::ostream& err) {
  RunConfig c = make_config(o);
  if (o.iters) c.transfer.iterations = *o.iters;
  const Loaded L = load_models(o);
  const auto dirs = load_directions(o, c, L.model.k());
  if (dirs.size() != 1) throw UsageError("--direction: ablate takes exactly one baseline direction");
  const Provenance prov = provenance_of(c);
  ArtifactTree tree(out_dir(o, c), prov);
  const auto& base = dirs.front();
  const std::string name = base.provenance.direction.empty() ? base.name : base.provenance.direction;
  const EvalContext ctx = make_eval_context(L.model, L.enc, o.n.value_or(c.eval.M), c.seed, c.lambda_g);
  const DirectionLearner learner = [&](std::size_t n, double ws, double wl) {
    err << "[dirforge] learning " << name << " n=" << n << " w_sem=" << ws << " w_latent=" << wl << "\n";
    DirectionEmbedding d = learn_registered(c, L.model, L.enc, name, n, ws, wl);
    d.recommended_lambda_e = base.recommended_lambda_e;
    d.window_lo = base.window_lo;
    d.window_hi = base.window_hi;
    const std::string rel = "directions/" + name + "-n" + std::to_string(n) + "-sem" + fmt_num(ws) + "-lat" +
                            fmt_num(wl) + ".gtd";
    save_direction(tree.root() / rel, d);
    tree.record(rel, "direction");
    return d;
  };
  std::size_t cell_no = 0;
  AblationReport rep = ablate(o.axis, ctx, name, base, base.recommended_lambda_e, learner,
                              [&](const AblationCell& cell) {
                                // Each cell lands on disk before the next one starts.
                                tree.write_json("cells/" + o.axis + "-" + std::to_string(cell_no++) + ".json",
                                                {{"label", cell.label}, {"diagonal", cell.diagonal},
                                                 {"off_target_mean", cell.off_target}, {"dominant", cell.dominant}},
                                                "cell");
                              });
  rep.config_hash = prov.config_hash;
  emit_report({ablation_bundle(rep, prov)}, tree);
  return finish(tree);
}

std::vector<std::string> cmd_report(const Options& o, std::ostream& err) {
  if (!o.in.empty()) {
    const VerifyResult v = verify_tree(o.in);
    for (const auto& p : v.problems) err << "[dirforge] " << p << "\n";
    if (!v.ok) throw Error("report: " + std::to_string(v.problems.size()) + " consistency problem(s) in " + o.in);
    err << "[dirforge] " << v.checked << " files consistent\n";
    return {(fs::path(o.in) / "index.json").string()};
  }
  RunConfig c = make_config(o);
  ArtifactTree tree(out_dir(o, c), provenance_of(c));
  emit_report({}, tree);
  return finish(tree);
}

std::vector<std::string> cmd_reproduce(const Options& o, std::ostream& err) {
  RunConfig c = make_config(o);
  const fs::path out = out_dir(o, c);
  const auto t0 = std::chrono::steady_clock::now();
  const ReproduceResult r = reproduce(c, out, [&](const std::string& s) {
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    err << "[dirforge " << fmt_num(sec, 4) << "s] " << s << "\n";
  });
  err << "[dirforge] rescoring: " << r.summary["dominant_rows"] << " of " << r.summary["rows"] << " rows dominant\n";
  std::vector<std::string> paths;
  for (const auto& f : r.files) paths.push_back((out / f).string());
  return paths;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Direction transfer lab: learn conditioning directions for a desk-scale diffusion model from "
               "procedural style edits, then edit, evaluate and ablate them.",
               "dirforge"};
  app.require_subcommand(1);
  Options o;
  std::vector<std::pair<CLI::App*, Handler>> handlers;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "JSON run config (unspecified keys keep defaults)")->check(CLI::ExistingFile);
    s->add_option("--seed", o.seed, "global seed");
    s->add_option("--out", o.out, "output directory (default reports/<timestamp>-<hash>)");
  };
  auto models = [&](CLI::App* s) {
    s->add_option("--model", o.model, "diffusion checkpoint")->required()->check(CLI::ExistingFile);
    s->add_option("--encoder", o.encoder, "encoder checkpoint")->required()->check(CLI::ExistingFile);
  };
  auto edits = [&](CLI::App* s, bool required) {
    auto* d = s->add_option("--direction", o.directions, "direction file (repeatable)")->check(CLI::ExistingFile);
    if (required) d->required();
    s->add_option("--lambda-e", o.lambda_e, "edit scale, matched by position with --direction (repeatable)");
    s->add_option("--window", o.window, "edit window lo,hi as fractions of T");
    s->add_option("--lambda-g", o.lambda_g, "guidance scale");
  };
  auto reg = [&](CLI::App* s, Handler h) { handlers.emplace_back(s, std::move(h)); };

  auto* world = app.add_subcommand("world", "synthetic world tools");
  world->require_subcommand(1);
  auto* gen = world->add_subcommand("gen", "write a pair dataset (meta.json + pairs.f32)");
  common(gen);
  gen->add_option("--n", o.n, "number of pairs");
  gen->add_option("--name", o.name, "registered direction: radius, intensity, aspect, center_x");
  reg(gen, cmd_world_gen);

  auto* train = app.add_subcommand("train", "train the encoder or the denoiser");
  train->require_subcommand(1);
  auto* tenc = train->add_subcommand("encoder", "train the embedding encoder");
  common(tenc);
  tenc->add_option("--iters", o.iters, "epochs");
  tenc->add_option("--n", o.n, "training samples");
  reg(tenc, cmd_train_encoder);
  auto* tdif = train->add_subcommand("diffusion", "train the conditional denoiser");
  common(tdif);
  tdif->add_option("--encoder", o.encoder, "encoder checkpoint")->required()->check(CLI::ExistingFile);
  tdif->add_option("--iters", o.iters, "optimizer steps");
  reg(tdif, cmd_train_diffusion);

  auto* direction = app.add_subcommand("direction", "direction embeddings");
  direction->require_subcommand(1);
  auto* learn = direction->add_subcommand("learn", "learn a direction from world pairs");
  common(learn);
  models(learn);
  learn->add_option("--name", o.name, "registered direction: radius, intensity, aspect, center_x");
  learn->add_option("--n", o.n, "number of pairs");
  learn->add_option("--iters", o.iters, "optimizer iterations");
  learn->add_option("--w-sem", o.w_sem, "semantic loss weight");
  learn->add_option("--w-latent", o.w_latent, "latent loss weight");
  learn->add_option("--lambda-e", o.lambda_e, "recommended edit scale to store (default: calibrated)");
  learn->add_option("--window", o.window, "recommended edit window lo,hi");
  reg(learn, cmd_direction_learn);

  auto* sample = app.add_subcommand("sample", "generate conditioned samples");
  common(sample);
  models(sample);
  sample->add_option("--n", o.n, "number of images");
  sample->add_option("--lambda-g", o.lambda_g, "guidance scale");
  reg(sample, cmd_sample);

  auto* edit = app.add_subcommand("edit", "generate with one or more direction edits");
  common(edit);
  models(edit);
  edits(edit, true);
  edit->add_option("--n", o.n, "number of images");
  reg(edit, cmd_edit);

  auto* edit_real = app.add_subcommand("edit-real", "invert images, then replay with edits");
  common(edit_real);
  models(edit_real);
  edits(edit_real, true);
  edit_real->add_option("--input", o.input, "images checkpoint (tensor 'images'); default renders world images")
      ->check(CLI::ExistingFile);
  edit_real->add_option("--n", o.n, "number of rendered images when --input is absent");
  reg(edit_real, cmd_edit_real);

  auto* interp = app.add_subcommand("interp", "sweep lambda_e for one direction");
  common(interp);
  models(interp);
  edits(interp, true);
  interp->add_option("--n", o.n, "number of images");
  reg(interp, cmd_interp);

  auto* eval = app.add_subcommand("eval", "quantitative evaluation");
  eval->require_subcommand(1);
  auto* resc = eval->add_subcommand("rescoring", "edited x measured attribute shift matrix");
  common(resc);
  models(resc);
  edits(resc, true);
  resc->add_option("--n", o.n, "evaluation images M");
  reg(resc, cmd_eval_rescoring);
  auto* dist = eval->add_subcommand("distance", "content-preservation distances");
  common(dist);
  models(dist);
  edits(dist, true);
  dist->add_option("--n", o.n, "evaluation images M");
  reg(dist, cmd_eval_distance);

  auto* abl = app.add_subcommand("ablate", "run one ablation grid");
  common(abl);
  models(abl);
  edits(abl, true);
  abl->add_option("--axis", o.axis, "timesteps, samples or loss_terms")
      ->required()
      ->check(CLI::IsMember({"timesteps", "samples", "loss_terms"}));
  abl->add_option("--n", o.n, "evaluation images M");
  abl->add_option("--iters", o.iters, "optimizer iterations for relearned directions");
  reg(abl, cmd_ablate);

  auto* report = app.add_subcommand("report", "verify an output tree, or write an empty report index");
  common(report);
  report->add_option("--in", o.in, "output tree to verify")->check(CLI::ExistingDirectory);
  reg(report, cmd_report);

  auto* repro = app.add_subcommand("reproduce", "run the whole experiment");
  common(repro);
  repro->add_flag("--paper-defaults", o.paper_defaults, "lr 5e-3, batch 8, 1000 iterations, N=100, seed 0");
  reg(repro, cmd_reproduce);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.back()->help());
    return 1;
  }

  for (auto& [sub, handler] : handlers) {
    if (!sub->parsed()) continue;
    try {
      const std::vector<std::string> paths = handler(o, err);
      out << json{{"outputs", paths}}.dump() << "\n";
      return 0;
    } catch (const UsageError& e) {
      err << "error: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }
  err << "error: no command given\n" << app.help();
  return 1;
}

}  // namespace dirforge
