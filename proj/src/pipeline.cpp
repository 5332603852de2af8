#include "dirforge/pipeline.hpp"

#include <cmath>

#include "dirforge/checkpoint.hpp"

namespace dirforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void tell(const Logger& say, const std::string& msg) {
  if (say) say(msg);
}

std::vector<std::string> attr_labels(const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  for (std::size_t i : idx) out.emplace_back(world::attr_names()[i]);
  return out;
}

json shift_json(const std::array<double, world::kAttrs>& s) {
  json j = json::object();
  for (std::size_t a = 0; a < world::kAttrs; ++a) j[std::string(world::attr_names()[a])] = s[a];
  return j;
}

json distance_json(const DistanceReport& d) {
  return {{"label", d.label}, {"pixel_l2", d.pixel_l2}, {"embedding_l2", d.embedding_l2}, {"count", d.count}};
}

std::size_t target_of(const std::string& name) { return world::find_direction(name).target; }

std::vector<std::vector<double>> first_rows(const Tensor& t, std::size_t n) {
  auto rows = unstack_rows(t);
  if (rows.size() > n) rows.resize(n);
  return rows;
}

}  // namespace

Encoder train_encoder_for(const RunConfig& cfg, EncoderTrainLog* log, const Logger& say) {
  return train_encoder(cfg.encoder, log, [&](std::size_t epoch, double loss) {
    if (epoch % 10 == 9 || epoch + 1 == cfg.encoder.epochs)
      tell(say, "encoder epoch " + std::to_string(epoch + 1) + " loss " + fmt_num(loss, 4));
  });
}

DiffusionModel train_model_for(const RunConfig& cfg, const Encoder& enc, DiffusionTrainLog* log, const Logger& say) {
  DenoiserConfig dc = cfg.denoiser;
  dc.k = enc.k();
  return train_diffusion(enc, cfg.schedule(), dc, cfg.diffusion, log, [&](std::size_t step, double loss) {
    if (step % 5000 == 0) tell(say, "denoiser step " + std::to_string(step) + " loss " + fmt_num(loss, 4));
  });
}

DirectionEmbedding learn_registered(const RunConfig& cfg, const DiffusionModel& m, const Encoder& enc,
                                    const std::string& name, std::size_t n, double w_sem, double w_latent,
                                    LearnLog* log) {
  TransferConfig tc = cfg.transfer;
  tc.seed = cfg.seed;
  tc.w_sem = w_sem;
  tc.w_latent = w_latent;
  const auto pairs = world::make_pairs(cfg.seed, n, world::find_direction(name));
  DirectionEmbedding d = learn_direction(pairs, name, m, enc, tc, log);
  d.provenance.world_seed = cfg.seed;
  d.provenance.config_hash = config_hash(cfg);
  d.window_lo = cfg.window_lo;
  d.window_hi = cfg.window_hi;
  return d;
}

ReportBundle rescoring_bundle(const RescoringMatrix& r, const Provenance& prov) {
  ReportBundle b;
  b.name = "rescoring";
  json rows = json::array();
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    rows.push_back({{"direction", r.rows[i]},
                    {"entries", r.entries[i]},
                    {"all_attributes", shift_json(r.full[i])},
                    {"lambda_e", r.lambda_e[i]},
                    {"window", {r.window[i][0], r.window[i][1]}},
                    {"dominant", row_dominant(r, i)},
                    {"off_target_mean", off_target_mean(r, i)},
                    {"distance", distance_json(r.distances[i])}});
  }
  std::size_t dominant = 0;
  for (std::size_t i = 0; i < r.rows.size(); ++i) dominant += row_dominant(r, i) ? 1 : 0;
  b.data = {{"columns", r.cols},
            {"rows", rows},
            {"M", r.M},
            {"undetected", r.undetected},
            {"evaluated", r.evaluated},
            {"flagged", r.flagged},
            {"dominant_rows", dominant},
            {"units", "mean oracle shift divided by the attribute's range; only sign and dominance compare across "
                      "attributes"}};
  b.csv.header = {"direction"};
  for (const auto& c : r.cols) b.csv.header.push_back(c);
  for (const auto& extra : {"lambda_e", "window_lo", "window_hi", "dominant", "off_target_mean"})
    b.csv.header.emplace_back(extra);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    std::vector<std::string> row{r.rows[i]};
    for (double v : r.entries[i]) row.push_back(fmt_num(v, 9));
    row.push_back(fmt_num(r.lambda_e[i], 9));
    row.push_back(fmt_num(r.window[i][0], 9));
    row.push_back(fmt_num(r.window[i][1], 9));
    row.push_back(row_dominant(r, i) ? "1" : "0");
    row.push_back(fmt_num(off_target_mean(r, i), 9));
    b.csv.rows.push_back(row);
  }
  b.svgs.emplace_back("", heatmap_svg("rescoring: edited (rows) x measured (columns)", r.rows, r.cols, r.entries, prov));
  return b;
}

ReportBundle distance_bundle(const std::string& name, const std::vector<DistanceReport>& d, const Provenance& prov) {
  ReportBundle b;
  b.name = name;
  json items = json::array();
  std::vector<std::string> labels;
  std::vector<std::vector<double>> vals(2);
  b.csv.header = {"label", "pixel_l2", "embedding_l2", "count"};
  for (const auto& x : d) {
    items.push_back(distance_json(x));
    labels.push_back(x.label);
    vals[0].push_back(x.pixel_l2);
    vals[1].push_back(x.embedding_l2);
    b.csv.rows.push_back({x.label, fmt_num(x.pixel_l2, 9), fmt_num(x.embedding_l2, 9), std::to_string(x.count)});
  }
  b.data = {{"distances", items}};
  b.svgs.emplace_back("", bar_svg("mean distance to the unedited image", labels, {"pixel L2", "embedding L2"}, vals, prov));
  return b;
}

ReportBundle ablation_bundle(const AblationReport& a, const Provenance& prov) {
  ReportBundle b;
  b.name = "ablation_" + a.axis;
  json cells = json::array();
  std::vector<std::string> labels;
  std::vector<std::vector<double>> effect(2), dist(2);
  b.csv.header = {"label", "lambda_e", "window_lo", "window_hi", "n", "w_sem", "w_latent", "d_norm",
                  "diagonal", "off_target_mean", "dominant", "pixel_l2", "embedding_l2"};
  for (const auto& c : a.cells) {
    cells.push_back({{"label", c.label},
                     {"lambda_e", c.lambda_e},
                     {"window", {c.window_lo, c.window_hi}},
                     {"n", c.n},
                     {"w_sem", c.w_sem},
                     {"w_latent", c.w_latent},
                     {"d_norm", c.d_norm},
                     {"shift", shift_json(c.shift)},
                     {"diagonal", c.diagonal},
                     {"off_target_mean", c.off_target},
                     {"dominant", c.dominant},
                     {"distance", distance_json(c.distance)}});
    labels.push_back(c.label);
    effect[0].push_back(c.diagonal);
    effect[1].push_back(c.off_target);
    dist[0].push_back(c.distance.pixel_l2);
    dist[1].push_back(c.distance.embedding_l2);
    b.csv.rows.push_back({c.label, fmt_num(c.lambda_e, 9), fmt_num(c.window_lo, 9), fmt_num(c.window_hi, 9),
                          std::to_string(c.n), fmt_num(c.w_sem, 9), fmt_num(c.w_latent, 9), fmt_num(c.d_norm, 9),
                          fmt_num(c.diagonal, 9), fmt_num(c.off_target, 9), c.dominant ? "1" : "0",
                          fmt_num(c.distance.pixel_l2, 9), fmt_num(c.distance.embedding_l2, 9)});
  }
  b.data = {{"axis", a.axis}, {"direction", a.direction}, {"cells", cells}};
  b.svgs.emplace_back("effect", bar_svg(a.axis + " ablation, " + a.direction + ": target vs off-target shift", labels,
                                        {"target shift", "off-target mean"}, effect, prov));
  b.svgs.emplace_back("distance", bar_svg(a.axis + " ablation, " + a.direction + ": content distance", labels,
                                          {"pixel L2", "embedding L2"}, dist, prov));
  return b;
}

ReportBundle interpolation_bundle(const InterpolationResult& ip, const std::string& direction, double lo, double hi,
                                  const Provenance& prov) {
  ReportBundle b;
  b.name = "interpolation";
  const auto cols = measured_attributes();
  std::vector<std::vector<double>> series(cols.size());
  json points = json::array();
  b.csv.header = {"lambda_e", "detected"};
  for (std::size_t c : cols) b.csv.header.emplace_back(world::attr_names()[c]);
  for (std::size_t g = 0; g < ip.grid.size(); ++g) {
    json mean = json::object();
    std::vector<std::string> row{fmt_num(ip.grid[g], 9), std::to_string(ip.detected[g])};
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = ip.trace[g][cols[c]] / world::ranges()[cols[c]].span();
      series[c].push_back(v);
      mean[std::string(world::attr_names()[cols[c]])] = v;
      row.push_back(fmt_num(v, 9));
    }
    points.push_back({{"lambda_e", ip.grid[g]}, {"detected", ip.detected[g]}, {"normalized_mean", mean}});
    b.csv.rows.push_back(row);
  }
  b.data = {{"direction", direction}, {"window", {lo, hi}}, {"points", points}};
  b.svgs.emplace_back("", line_svg("interpolation, " + direction + ": mean attribute / range vs lambda_e", ip.grid,
                                   attr_labels(cols), series, prov));
  return b;
}

CompositionResult compose(const EvalContext& ctx, const std::vector<DirectionEmbedding>& dirs,
                          const std::vector<double>& lambda_e) {
  if (dirs.size() != lambda_e.size() || dirs.empty())
    throw InvalidArgument("compose: one lambda_e per direction, at least one direction");
  CompositionResult out;
  std::vector<Edit> edits;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    out.names.push_back(dirs[i].name);
    out.lambda_e.push_back(lambda_e[i]);
    out.targets.push_back(target_of(dirs[i].name));
    edits.push_back(make_edit(dirs[i], lambda_e[i]));
    out.single.push_back(evaluate_edits(ctx, {edits.back()}).shift);
  }
  const CellResult both = evaluate_edits(ctx, edits);
  out.combined = both.shift;
  out.images = both.images;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const double s = out.single[i][out.targets[i]];
    out.retained.push_back(s != 0.0 ? out.combined[out.targets[i]] / s : 0.0);
  }
  return out;
}

ReportBundle composition_bundle(const CompositionResult& c, const Provenance& prov) {
  ReportBundle b;
  b.name = "composition";
  json edits = json::array();
  std::vector<std::string> labels;
  std::vector<std::vector<double>> vals(2);
  b.csv.header = {"direction", "lambda_e", "target", "single_shift", "combined_shift", "retained"};
  for (std::size_t i = 0; i < c.names.size(); ++i) {
    const std::string attr(world::attr_names()[c.targets[i]]);
    edits.push_back({{"direction", c.names[i]},
                     {"lambda_e", c.lambda_e[i]},
                     {"target", attr},
                     {"single", shift_json(c.single[i])},
                     {"retained", c.retained[i]}});
    labels.push_back(attr);
    vals[0].push_back(c.single[i][c.targets[i]]);
    vals[1].push_back(c.combined[c.targets[i]]);
    b.csv.rows.push_back({c.names[i], fmt_num(c.lambda_e[i], 9), attr, fmt_num(c.single[i][c.targets[i]], 9),
                          fmt_num(c.combined[c.targets[i]], 9), fmt_num(c.retained[i], 9)});
  }
  b.data = {{"edits", edits}, {"combined", shift_json(c.combined)}};
  b.svgs.emplace_back("", bar_svg("composition: target shift alone vs combined", labels, {"single edit", "combined edit"},
                                  vals, prov));
  return b;
}

MonotoneCheck monotone_trace(const InterpolationResult& ip, std::size_t target, double floor) {
  MonotoneCheck mc;
  const double span = world::ranges()[target].span();
  for (const auto& s : ip.trace) mc.trace.push_back(s[target] / span);
  mc.worst_step = 0.0;
  for (std::size_t i = 1; i < mc.trace.size(); ++i) mc.worst_step = std::min(mc.worst_step, mc.trace[i] - mc.trace[i - 1]);
  mc.monotone = mc.worst_step >= -floor;
  return mc;
}

ReproduceResult reproduce(const RunConfig& cfg_in, const fs::path& out, const Logger& say) {
  RunConfig cfg = cfg_in;
  cfg.finalize();
  const Provenance prov = provenance_of(cfg);
  ArtifactTree tree(out, prov);
  ReproduceResult res;
  res.root = out;

  tree.write_json("config.json", {{"config", to_json(cfg)}}, "config");

  tell(say, "training encoder");
  EncoderTrainLog elog;
  const Encoder enc = train_encoder_for(cfg, &elog, say);
  save_encoder(out / "models/encoder.gtfw", enc, prov);
  tree.record("models/encoder.gtfw", "checkpoint");
  const auto r2 = probe_r2(enc, cfg.seed);

  tell(say, "training denoiser (" + std::to_string(cfg.diffusion.steps) + " steps)");
  DiffusionTrainLog dlog;
  const DiffusionModel m = train_model_for(cfg, enc, &dlog, say);
  save_model(out / "models/diffusion.gtfw", m, prov);
  tree.record("models/diffusion.gtfw", "checkpoint");

  {
    ReportBundle tb;
    tb.name = "training";
    json r2j = json::object();
    for (std::size_t a = 0; a < world::kAttrs; ++a) r2j[std::string(world::attr_names()[a])] = r2[a];
    tb.data = {{"encoder_epoch_loss", elog.epoch_loss},
               {"encoder_probe_r2", r2j},
               {"denoiser_window_loss", dlog.window_loss},
               {"denoiser_window", dlog.window},
               {"denoiser_initial_loss", dlog.initial_loss},
               {"denoiser_final_loss", dlog.final_loss}};
    tb.csv.header = {"step", "denoiser_loss"};
    std::vector<double> xs;
    for (std::size_t i = 0; i < dlog.window_loss.size(); ++i) {
      xs.push_back(static_cast<double>((i + 1) * dlog.window));
      tb.csv.rows.push_back({std::to_string((i + 1) * dlog.window), fmt_num(dlog.window_loss[i], 9)});
    }
    tb.svgs.emplace_back("", line_svg("denoiser training loss", xs, {"window mean"}, {dlog.window_loss}, prov));
    emit_report({tb}, tree);
  }

  std::vector<DirectionEmbedding> dirs;
  json learn_logs = json::object();
  for (const auto& g : world::registry()) {
    tell(say, "learning direction " + g.name);
    LearnLog ll;
    dirs.push_back(learn_registered(cfg, m, enc, g.name, cfg.transfer.n, cfg.transfer.w_sem, cfg.transfer.w_latent, &ll));
    std::vector<double> every10;
    for (std::size_t i = 0; i < ll.loss.size(); i += 10) every10.push_back(ll.loss[i]);
    learn_logs[g.name] = {{"loss_every_10", every10}, {"final_d_norm", ll.d_norm.empty() ? 0.0 : ll.d_norm.back()},
                          {"warnings", ll.warnings}};
  }

  tell(say, "calibrating lambda_e");
  const EvalContext calib = make_eval_context(m, enc, cfg.eval.calib_M, cfg.seed + 1, cfg.lambda_g);
  std::vector<double> lambdas;
  for (auto& d : dirs) {
    d.recommended_lambda_e = calibrate_lambda_e(calib, d, cfg.eval.lambda_grid, cfg.eval.calib_target);
    lambdas.push_back(d.recommended_lambda_e);
    save_direction(out / ("directions/" + d.name + ".gtd"), d);
    tree.record("directions/" + d.name + ".gtd", "direction");
  }
  {
    json cal = json::object();
    for (const auto& d : dirs) cal[d.name] = d.recommended_lambda_e;
    tree.write_json("directions/learning.json",
                    {{"learning", learn_logs},
                     {"calibrated_lambda_e", cal},
                     {"calibration", {{"M", cfg.eval.calib_M}, {"seed", cfg.seed + 1}, {"target_shift", cfg.eval.calib_target},
                                      {"grid", cfg.eval.lambda_grid}}}},
                    "report");
  }

  tell(say, "rescoring");
  const EvalContext ctx = make_eval_context(m, enc, cfg.eval.M, cfg.seed, cfg.lambda_g);
  res.rescoring = rescoring(ctx, dirs, lambdas);
  res.rescoring.config_hash = prov.config_hash;
  emit_report({rescoring_bundle(res.rescoring, prov), distance_bundle("distances", res.rescoring.distances, prov)}, tree);
  tree.write("samples/unedited.pgm", pgm_tiles(first_rows(ctx.base_images, 16), world::kSide, 8, world::kPixelMax, prov),
             "image");
  for (const auto& d : dirs) {
    const CellResult cell = evaluate_edits(ctx, {make_edit(d, d.recommended_lambda_e)});
    tree.write("samples/" + d.name + ".pgm", pgm_tiles(first_rows(cell.images, 16), world::kSide, 8, world::kPixelMax, prov),
               "image");
  }

  const std::string abl = cfg.eval.ablation_direction;
  std::size_t abl_i = dirs.size();
  for (std::size_t i = 0; i < dirs.size(); ++i)
    if (dirs[i].name == abl) abl_i = i;
  if (abl_i == dirs.size()) throw InvalidArgument("ablation direction '" + abl + "' is not registered");
  const double lam = dirs[abl_i].recommended_lambda_e;
  const DirectionLearner learner = [&](std::size_t n, double ws, double wl) {
    tell(say, "learning ablation direction " + abl + " n=" + std::to_string(n) + " w_sem=" + fmt_num(ws) +
                  " w_latent=" + fmt_num(wl));
    DirectionEmbedding d = learn_registered(cfg, m, enc, abl, n, ws, wl);
    d.recommended_lambda_e = lam;
    const std::string rel = "directions/ablation/" + abl + "-n" + std::to_string(n) + "-sem" + fmt_num(ws) + "-lat" +
                            fmt_num(wl) + ".gtd";
    save_direction(out / rel, d);
    tree.record(rel, "direction");
    return d;
  };
  for (const char* axis : {"timesteps", "samples", "loss_terms"}) {
    tell(say, std::string("ablation ") + axis);
    AblationReport rep = ablate(axis, ctx, abl, dirs[abl_i], lam, learner);
    rep.config_hash = prov.config_hash;
    emit_report({ablation_bundle(rep, prov)}, tree);
    if (rep.axis == "timesteps") res.timesteps = rep;
    if (rep.axis == "samples") res.samples = rep;
    if (rep.axis == "loss_terms") res.loss_terms = rep;
  }

  tell(say, "interpolation");
  res.interpolation = interpolate_edit(m, cfg.seed, std::min(cfg.eval.interp_rows, cfg.eval.M), ctx.base_c, cfg.lambda_g,
                                       dirs[abl_i], cfg.eval.interp_grid, cfg.window_lo, cfg.window_hi);
  res.monotone = monotone_trace(res.interpolation, target_of(abl), cfg.eval.noise_floor);
  res.lambda0_identical = false;
  for (std::size_t g = 0; g < res.interpolation.grid.size(); ++g) {
    if (res.interpolation.grid[g] != 0.0) continue;
    const Tensor& img = res.interpolation.images[g];
    const std::size_t rows = img.dim(0), w = img.dim(1);
    res.lambda0_identical = true;
    for (std::size_t i = 0; i < rows * w; ++i)
      if (img.at(i) != ctx.base_images.at(i)) res.lambda0_identical = false;
  }
  {
    ReportBundle ib = interpolation_bundle(res.interpolation, abl, cfg.window_lo, cfg.window_hi, prov);
    ib.data["target_trace"] = res.monotone.trace;
    ib.data["worst_step"] = res.monotone.worst_step;
    ib.data["monotone"] = res.monotone.monotone;
    ib.data["noise_floor"] = cfg.eval.noise_floor;
    ib.data["lambda0_identical_to_unedited"] = res.lambda0_identical;
    emit_report({ib}, tree);
    std::vector<std::vector<double>> strip;
    for (std::size_t r = 0; r < 8 && r < ctx.M; ++r)
      for (const auto& imgs : res.interpolation.images) strip.push_back(unstack_rows(imgs)[r]);
    tree.write("samples/interpolation.pgm",
               pgm_tiles(strip, world::kSide, res.interpolation.grid.size(), world::kPixelMax, prov), "image");
  }

  tell(say, "composition");
  {
    std::vector<DirectionEmbedding> cd;
    std::vector<double> cl;
    for (const auto& name : cfg.eval.composition)
      for (const auto& d : dirs)
        if (d.name == name) {
          cd.push_back(d);
          cl.push_back(d.recommended_lambda_e);
        }
    if (cd.size() != cfg.eval.composition.size()) throw InvalidArgument("composition names an unregistered direction");
    res.composition = compose(ctx, cd, cl);
    emit_report({composition_bundle(res.composition, prov)}, tree);
    tree.write("samples/composition.pgm",
               pgm_tiles(first_rows(res.composition.images, 16), world::kSide, 8, world::kPixelMax, prov), "image");
  }

  std::size_t dominant_rows = 0;
  for (std::size_t i = 0; i < res.rescoring.rows.size(); ++i) dominant_rows += row_dominant(res.rescoring, i) ? 1 : 0;
  json retained = json::array();
  for (double r : res.composition.retained) retained.push_back(r);
  res.summary = {
      {"dominant_rows", dominant_rows},
      {"rows", res.rescoring.rows.size()},
      {"lambda_e", lambdas},
      {"samples", {{"n10_dominant", res.samples.cells.at(0).dominant},
                   {"n10_off_target", res.samples.cells.at(0).off_target},
                   {"n100_off_target", res.samples.cells.at(1).off_target}}},
      {"loss_terms", {{"full_off_target", res.loss_terms.cells.at(0).off_target},
                      {"wo_latent_off_target", res.loss_terms.cells.at(1).off_target},
                      {"wo_semantic_off_target", res.loss_terms.cells.at(2).off_target}}},
      {"timesteps", {{"all_pixel_l2", res.timesteps.cells.at(0).distance.pixel_l2},
                     {"all_embedding_l2", res.timesteps.cells.at(0).distance.embedding_l2},
                     {"window_pixel_l2", res.timesteps.cells.at(1).distance.pixel_l2},
                     {"window_embedding_l2", res.timesteps.cells.at(1).distance.embedding_l2},
                     {"window_dominant", res.timesteps.cells.at(1).dominant}}},
      {"interpolation", {{"monotone", res.monotone.monotone}, {"worst_step", res.monotone.worst_step},
                         {"lambda0_identical", res.lambda0_identical}}},
      {"composition_retained", retained},
      {"noise_floor", cfg.eval.noise_floor}};
  tree.write_json("summary.json", res.summary, "report");

  tree.finish();
  res.files = tree.files();
  res.files.push_back("index.json");
  res.directions = dirs;
  return res;
}

}  // namespace dirforge
