// End-to-end acceptance run: one PASS/FAIL line per criterion.
// Usage: dirforge_acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "dirforge/checkpoint.hpp"
#include "dirforge/cli.hpp"
#include "dirforge/editing.hpp"
#include "dirforge/pipeline.hpp"
#include "dirforge/world.hpp"
#include "support.hpp"

using namespace dirforge;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-5;
constexpr std::size_t kMinGradCases = 100;
constexpr double kAffineTol = 1e-12;
constexpr double kRoundTripTol = 1e-8;
constexpr std::size_t kRoundTripImages = 20;
constexpr std::size_t kMinDominantRows = 3;
constexpr double kMaxMinutes = 30.0;
constexpr double kMinRetained = 0.5;

int failures = 0;

void report(int id, const std::string& what, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

RunConfig reproduction_config() {
  RunConfig c;
  c.transfer.lr = 5e-3;
  c.transfer.batch = 8;
  c.transfer.iterations = 1000;
  c.transfer.n = 100;
  c.seed = 0;
  c.finalize();
  return c;
}

// Gradient cases: every primitive plus the full transfer objective, both on
// tiny models and on the trained ones.
void check_gradients(const DiffusionModel& m, const Encoder& enc) {
  auto cases = testing::primitive_cases(101, 4);
  for (auto& c : testing::transfer_loss_cases(102, 12)) cases.push_back(std::move(c));
  const auto pairs = world::make_pairs(103, 2, world::find_direction("radius"));
  const Tensor x = stack_rows(pairs.input), x2 = stack_rows(pairs.edited);
  Rng rng(104);
  for (int i = 0; i < 4; ++i) {
    std::vector<int> ts{static_cast<int>(rng.between(1, m.schedule.T)), static_cast<int>(rng.between(1, m.schedule.T))};
    const Tensor eps = testing::random_tensor(rng, x.shape());
    const Tensor x_t = forward_noise(m.schedule, m.data.to_model(x), ts, eps);
    const Tensor x2_t = forward_noise(m.schedule, m.data.to_model(x2), ts, eps);
    cases.push_back({"trained_transfer_loss",
                     [&m, &enc, x, x2, x_t, x2_t, ts](const std::vector<Tensor>& v) {
                       return add(semantic_loss(enc, x, x2, v[0]), latent_loss(m, x_t, x2_t, ts, v[0]));
                     },
                     {testing::random_tensor(rng, {m.k()}, -0.5, 0.5)}});
  }
  double worst = 0.0;
  std::size_t full = 0;
  for (const auto& c : cases) {
    worst = std::max(worst, testing::grad_check(c.f, c.leaves));
    full += c.name.find("transfer_loss") != std::string::npos;
  }
  report(1, "gradient check", cases.size() >= kMinGradCases && full > 0 && worst < kGradTol,
         std::to_string(cases.size()) + " cases (" + std::to_string(full) + " full objective), worst rel err " +
             num(worst));
}

void check_guidance(const DiffusionModel& m) {
  Rng rng(201);
  const auto imgs = world::make_pairs(202, 4, world::find_direction("intensity")).input;
  const Tensor x0 = m.data.to_model(stack_rows(imgs));
  const Tensor c = testing::random_tensor(rng, {4, m.k()});
  bool endpoints = true, single = true, empty = true;
  double affine = 0.0;
  DirectionEmbedding dir;
  dir.name = "radius";
  dir.d = testing::random_tensor(rng, {m.k()}).values();
  for (int t : {1, 20, 40, 41, 75, 100}) {
    const Tensor x_t = forward_noise(m.schedule, x0, t, testing::random_tensor(rng, x0.shape()));
    const Tensor phi = predict_noise(m, x_t, t, null_condition(m.k()));
    const Tensor cond = predict_noise(m, x_t, t, c);
    endpoints &= cfg_predict(m, x_t, t, c, 0.0).values() == phi.values();
    endpoints &= cfg_predict(m, x_t, t, c, 1.0).values() == cond.values();
    for (double g : {0.25, 0.5, 2.0, 7.5}) {
      const Tensor e = cfg_predict(m, x_t, t, c, g);
      for (std::size_t i = 0; i < e.numel(); ++i)
        affine = std::max(affine, std::abs(e.at(i) - (phi.at(i) + g * (cond.at(i) - phi.at(i)))));
    }
    EditSpec spec;
    spec.base_c = c;
    spec.lambda_g = 2.0;
    empty &= edited_noise(m, x_t, t, spec).values() == cfg_predict(m, x_t, t, c, 2.0).values();
    spec.edits = {make_edit(dir, 1.5, 0.0, 0.4)};
    Tensor want = cfg_predict(m, x_t, t, c, 2.0);
    if (in_window(spec.edits[0], t, m.schedule.T))
      want = add(want, scale(sub(predict_noise(m, x_t, t, Tensor::from({m.k()}, dir.d)), phi), 1.5));
    single &= edited_noise(m, x_t, t, spec).values() == want.values();
  }
  report(2, "guidance identities", endpoints && single && empty && affine <= kAffineTol,
         std::string("endpoints ") + (endpoints ? "exact" : "differ") + ", affine err " + num(affine) +
             ", single edit " + (single ? "bit-identical" : "differs") + ", empty spec " +
             (empty ? "bit-identical" : "differs"));
}

void check_inversion(const DiffusionModel& m) {
  Rng rng(301);
  std::vector<world::Image> xs;
  while (xs.size() + 1 < kRoundTripImages) xs.push_back(world::render(world::sample_style(rng)));
  xs.push_back(world::Image(world::kPixels, 0.5));
  const Tensor x0 = stack_rows(xs);
  const InversionRecord rec = invert(m, x0, 302);
  RecordedNoise replay(rec);
  const Tensor back = sample(m, replay, [&](const Tensor& x, int t) { return predict_noise(m, x, t, null_condition(m.k())); });
  double worst = 0.0;
  for (std::size_t i = 0; i < x0.numel(); ++i) worst = std::max(worst, std::abs(back.at(i) - x0.at(i)));
  report(3, "inversion round trip", worst < kRoundTripTol,
         std::to_string(xs.size()) + " images incl. constant, max abs err " + num(worst));
}

const AblationCell* find_cell(const AblationReport& r, const std::function<bool(const AblationCell&)>& pred) {
  for (const auto& c : r.cells)
    if (pred(c)) return &c;
  return nullptr;
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) {
    why = "file lists differ (" + std::to_string(fa.size()) + " vs " + std::to_string(fb.size()) + ")";
    return false;
  }
  for (const auto& rel : fa) {
    std::ifstream ia(a / rel, std::ios::binary), ib(b / rel, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(ia)), {}), cb((std::istreambuf_iterator<char>(ib)), {});
    if (ca != cb) {
      why = rel.string() + " differs";
      return false;
    }
  }
  why = std::to_string(fa.size()) + " files byte-identical";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "dirforge_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path run_a = work / "a", run_b = work / "b";

  const RunConfig cfg = reproduction_config();
  const auto t0 = std::chrono::steady_clock::now();
  const ReproduceResult r = reproduce(cfg, run_a, [&](const std::string& s) {
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "[acceptance " << num(sec) << "s] " << s << "\n";
  });
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

  const DiffusionModel m = load_model(run_a / "models/diffusion.gtfw");
  const Encoder enc = load_encoder(run_a / "models/encoder.gtfw");
  const double floor = cfg.eval.noise_floor;

  check_gradients(m, enc);
  check_guidance(m);
  check_inversion(m);

  std::size_t dominant = 0;
  for (std::size_t i = 0; i < r.rescoring.rows.size(); ++i) dominant += row_dominant(r.rescoring, i);
  report(4, "rescoring dominance", dominant >= kMinDominantRows && minutes < kMaxMinutes,
         std::to_string(dominant) + " of " + std::to_string(r.rescoring.rows.size()) + " rows dominant, runtime " +
             num(minutes) + " min");

  {
    const auto* n10 = find_cell(r.samples, [](const AblationCell& c) { return c.n == 10; });
    const auto* n100 = find_cell(r.samples, [](const AblationCell& c) { return c.n == 100; });
    const bool ok = n10 && n100 && n10->dominant && n100->off_target <= n10->off_target + floor;
    report(5, "sample count ablation", ok,
           n10 && n100 ? "N=10 " + std::string(n10->dominant ? "dominant" : "not dominant") + ", off-target N=100 " +
                             num(n100->off_target) + " vs N=10 " + num(n10->off_target) + " + floor " + num(floor)
                       : "missing cells");
  }
  {
    const auto* full = find_cell(r.loss_terms, [](const AblationCell& c) { return c.w_sem > 0 && c.w_latent > 0; });
    const auto* wo = find_cell(r.loss_terms, [](const AblationCell& c) { return c.w_sem > 0 && c.w_latent == 0; });
    const bool ok = full && wo && wo->off_target > full->off_target;
    report(6, "latent loss ablation", ok,
           full && wo ? "off-target w/o latent " + num(wo->off_target) + " vs full " + num(full->off_target)
                      : "missing cells");
  }
  {
    const auto* all = find_cell(r.timesteps, [](const AblationCell& c) { return c.window_lo == 0 && c.window_hi == 1; });
    const auto* win = find_cell(r.timesteps, [](const AblationCell& c) { return c.window_lo == 0 && c.window_hi == 0.4; });
    const bool ok = all && win && win->distance.pixel_l2 < all->distance.pixel_l2 &&
                    win->distance.embedding_l2 < all->distance.embedding_l2 && win->dominant;
    report(7, "timestep window ablation", ok,
           all && win ? "pixel L2 " + num(win->distance.pixel_l2) + " vs " + num(all->distance.pixel_l2) +
                            ", embedding L2 " + num(win->distance.embedding_l2) + " vs " +
                            num(all->distance.embedding_l2) + ", window " +
                            (win->dominant ? "dominant" : "not dominant")
                      : "missing cells");
  }
  {
    const auto& g = r.interpolation.grid;
    const bool grid_ok = g == std::vector<double>{-2, -1, 0, 1, 2};
    std::string trace;
    for (double v : r.monotone.trace) trace += (trace.empty() ? "" : " ") + num(v);
    report(8, "interpolation", grid_ok && r.monotone.monotone && r.lambda0_identical,
           "trace [" + trace + "], worst step " + num(r.monotone.worst_step) + ", lambda 0 " +
               (r.lambda0_identical ? "bit-identical" : "differs"));
  }
  {
    bool ok = !r.composition.retained.empty();
    std::string detail;
    for (std::size_t i = 0; i < r.composition.retained.size(); ++i) {
      ok &= r.composition.retained[i] >= kMinRetained;
      detail += (detail.empty() ? "" : ", ") + r.composition.names[i] + " retains " + num(r.composition.retained[i]);
    }
    report(9, "composition", ok, detail);
  }
  {
    std::ostringstream out, err;
    const std::string out_s = run_b.string();
    const char* args[] = {"dirforge", "reproduce", "--paper-defaults", "--out", out_s.c_str()};
    const int code = run_cli(5, args, out, err);
    std::string why = "second run exited " + std::to_string(code);
    const bool ok = code == 0 && same_tree(run_a, run_b, why);
    report(10, "determinism", ok, why);
  }

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
