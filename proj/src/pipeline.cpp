#include "spiralir/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace spiralir {

using io::json;

namespace {

void require_artifact(const fs::path& p) {
  if (!fs::exists(p))
    throw std::invalid_argument("missing input artifact: " + p.string() +
                                " (run the earlier pipeline stages first)");
}

std::vector<double> kspace_frame_times(const KSpaceSeries& s) {
  std::vector<double> t(s.frames.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = s.frames[i].frame_time_ms;
  return t;
}

double percentile(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double idx = pct / 100.0 * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (idx - lo) * (v[hi] - v[lo]);
}

LatentCode assemble_latents(const LatentSignals& latents, const std::vector<double>& contrast) {
  LatentCode code;
  code.z.resize(contrast.size());
  for (std::size_t i = 0; i < contrast.size(); ++i)
    code.z[i] = {latents.resp[i], latents.cardiac[i], contrast[i]};
  return code;
}

}  // namespace

TrajectorySchedule make_schedule(const RunConfig& cfg) { return golden_angle_schedule(cfg.seq); }

Dictionary build_folded_dictionary(const RunConfig& cfg, const TrajectorySchedule& schedule) {
  const std::string grid_kind =
      cfg.dict_grid == "auto" ? (cfg.phantom_kind == "vials" ? "vials" : "default")
                              : cfg.dict_grid;
  const auto grid = grid_kind == "vials" ? vial_t1_grid() : default_t1_grid();
  const auto dict = build_dictionary(schedule, grid, cfg.binning, cfg.inv_efficiency);
  return fold_blocks(dict, cfg.seq.n_inversions);
}

std::vector<double> block_contrast_sweep(const RunConfig& cfg,
                                         const TrajectorySchedule& schedule) {
  const int frames_per_block = cfg.seq.interleaves_per_inversion / cfg.binning;
  std::vector<double> times(frames_per_block);
  for (int k = 0; k < frames_per_block; ++k) {
    double t = 0;
    for (int j = 0; j < cfg.binning; ++j)
      t += schedule.entries[static_cast<std::size_t>(k) * cfg.binning + j].time_ms;
    times[k] = t / cfg.binning;
  }
  return contrast_signal(schedule, times);
}

double null_contrast_for_t1(const RunConfig& cfg, const TrajectorySchedule& schedule,
                            double t1_ms) {
  const auto evo = bin_average(
      simulate_ir_spgr(schedule, TissueParams{t1_ms, 1.0}, cfg.inv_efficiency), cfg.binning);
  const int fpb = cfg.seq.interleaves_per_inversion / cfg.binning;
  // Fold across blocks, then take the minimum-|signal| bin.
  int best = 0;
  double best_mag = 1e300;
  for (int k = 0; k < fpb; ++k) {
    double s = 0;
    for (int b = 0; b < cfg.seq.n_inversions; ++b) s += evo.values[b * fpb + k];
    if (std::abs(s) < best_mag) {
      best_mag = std::abs(s);
      best = k;
    }
  }
  const auto sweep = block_contrast_sweep(cfg, schedule);
  return sweep[best];
}

std::vector<std::string> cmd_simulate(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  fs::create_directories(out);
  const auto schedule = make_schedule(cfg);
  io::save_schedule(out, schedule, cfg.spiral);

  GroundTruth truth;
  if (cfg.phantom_kind == "vials") {
    truth = generate_ground_truth(make_vial_spec(cfg), schedule, cfg.binning, cfg.inv_efficiency);
  } else {
    truth =
        generate_ground_truth(make_cardiac_spec(cfg), schedule, cfg.binning, cfg.inv_efficiency);
  }
  io::save_ground_truth(out, truth);

  const auto coils = synthetic_coil_maps(cfg.n_coils, cfg.seq.matrix_size, cfg.seq.matrix_size);
  io::save_coils(out, coils);

  auto series = simulate_acquisition(truth, schedule, cfg.spiral, coils, 0.0, 0);
  const double sigma = cfg.snr_db < 1e9 ? sigma_for_snr_db(series, cfg.snr_db) : 0.0;
  if (sigma > 0) add_complex_noise(series, sigma, derive_seed(cfg.seed, "noise"));
  io::save_kspace(out, series);

  return {"schedule.json",   "schedule_coords.f64", "truth.json",   "truth_frames.c64",
          "truth_t1.f32",    "coils.json",          "coils.c64",    "kspace.json",
          "kspace_data.c64", "kspace_coords.f64"};
}

std::vector<std::string> cmd_estimate_motion(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  require_artifact(out / "kspace.json");
  const auto series = io::load_kspace(out);

  const auto nav = extract_navigator(series, cfg.nav_radius);
  const auto schedule = make_schedule(cfg);
  if (schedule_hash(schedule) != series.schedule_hash)
    throw std::invalid_argument(
        "estimate-motion: k-space series was generated with a different schedule");
  const auto detrended =
      detrend_navigators(nav, contrast_basis(schedule, cfg.binning));
  const auto times = kspace_frame_times(series);
  // Condition on the known contrast signal so the latents carry motion only.
  const auto contrast = contrast_signal(schedule, times);
  std::vector<std::vector<double>> cond(contrast.size());
  for (std::size_t i = 0; i < contrast.size(); ++i) cond[i] = {contrast[i]};

  VaeConfig vcfg;
  vcfg.hidden = cfg.vae_hidden;
  vcfg.beta = cfg.vae_beta;
  vcfg.epochs = cfg.vae_epochs;
  vcfg.batch = cfg.vae_batch;
  vcfg.lr = cfg.vae_lr;
  const auto model = train_vae(detrended, vcfg, derive_seed(cfg.seed, "vae"), cond);

  const auto latents = encode_motion(model, detrended, times, cond);
  if (!latents.labeling_ok)
    std::fprintf(stderr, "estimate-motion: %s\n", latents.labeling_note.c_str());
  io::save_latents(out, latents, times);
  return {"latents.csv", "latents.json"};
}

std::vector<std::string> cmd_reconstruct(const RunConfig& cfg, const fs::path& out, bool resume) {
  cfg.validate();
  require_artifact(out / "kspace.json");
  require_artifact(out / "coils.json");
  require_artifact(out / "latents.csv");
  const auto series = io::load_kspace(out);
  const auto coils = io::load_coils(out);
  const auto latents = io::load_latents(out);
  const auto schedule = make_schedule(cfg);
  if (schedule_hash(schedule) != series.schedule_hash)
    throw std::invalid_argument(
        "reconstruct: k-space series was generated with a different schedule than the config");

  const auto contrast = contrast_signal(schedule, kspace_frame_times(series));
  const auto code = assemble_latents(latents, contrast);

  const auto gcfg =
      GeneratorConfig::make(cfg.seq.matrix_size, 3, cfg.gen_param_multiple);
  TrainConfig tcfg;
  tcfg.lambda1 = cfg.gen_lambda1;
  tcfg.batch = cfg.gen_batch;
  tcfg.epochs = cfg.gen_epochs;
  tcfg.lr = cfg.gen_lr;
  tcfg.sigma_probe = cfg.gen_sigma_probe;
  tcfg.seed = derive_seed(cfg.seed, "gen");
  tcfg.verbose = true;

  TrainState prev;
  TrainResult result;
  if (resume) {
    require_artifact(out / "checkpoint.json");
    prev = io::load_checkpoint(out);
    result = train_generator(series, coils, code, gcfg, tcfg, &prev);
  } else {
    result = train_generator(series, coils, code, gcfg, tcfg);
  }

  io::save_checkpoint(out, result.state, gcfg, tcfg.seed);

  // Append epoch rows so a resumed run extends the existing log.
  std::vector<std::vector<double>> rows;
  const int first_epoch = result.state.epoch - static_cast<int>(result.data_loss.size());
  for (std::size_t i = 0; i < result.data_loss.size(); ++i)
    rows.push_back({static_cast<double>(first_epoch + 1 + i), result.data_loss[i],
                    result.reg_loss[i]});
  if (resume && fs::exists(out / "train_log.csv")) {
    const auto text = io::read_text(out / "train_log.csv");
    std::string add;
    for (const auto& r : rows) {
      add += std::to_string(static_cast<int>(r[0])) + "," + std::to_string(r[1]) + "," +
             std::to_string(r[2]) + "\n";
    }
    io::write_text(out / "train_log.csv", text + add);
  } else {
    io::write_csv(out / "train_log.csv", {"epoch", "data_loss", "reg_loss"}, rows);
  }

  if (result.aborted)
    throw std::runtime_error(
        "reconstruct: training aborted on non-finite loss; last-good checkpoint saved");
  return {"checkpoint.json", "checkpoint_params.f32", "checkpoint_adam_m.f32",
          "checkpoint_adam_v.f32", "train_log.csv"};
}

VialReport vial_t1_report(const T1Map& map, const VialPhantomSpec& spec) {
  VialReport rep;
  for (const auto& vial : spec.vials) {
    double sum = 0;
    int count = 0;
    const double r_roi = std::max(1.0, vial.radius - 1.5);
    for (int y = 0; y < map.h; ++y)
      for (int x = 0; x < map.w; ++x) {
        const double d = std::hypot(x + 0.5 - vial.cx, y + 0.5 - vial.cy);
        const std::size_t p = static_cast<std::size_t>(y) * map.w + x;
        if (d <= r_roi && map.valid[p]) {
          sum += map.t1_ms[p];
          ++count;
        }
      }
    rep.vial_truth_ms.push_back(vial.t1_ms);
    rep.vial_estimate_ms.push_back(count > 0 ? sum / count : 0.0);
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < spec.vials.size(); ++i) labels.push_back("vial_" + std::to_string(i));
  rep.agreement = agreement_report(rep.vial_estimate_ms, rep.vial_truth_ms, labels);
  return rep;
}

CardiacRois cardiac_rois(const CardiacPhantomSpec& spec, double cardiac_phase,
                         double resp_phase) {
  CardiacRois rois;
  const double endo_scale = 1.0 - spec.contraction * (cardiac_phase + 1.0) / 2.0;
  const double cy = spec.heart_cy + spec.resp_amp_px * resp_phase;
  const double margin = 1.5;
  for (int y = 0; y < spec.grid; ++y)
    for (int x = 0; x < spec.grid; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      const double dx = px - spec.heart_cx, dy = py - cy;
      const double r = std::hypot(dx, dy);
      if (r <= 0) continue;
      const double ct = dx / r, st = dy / r;
      auto radial = [&](double rx, double ry) {
        const double a = ct / rx, b = st / ry;
        return 1.0 / std::sqrt(a * a + b * b);
      };
      const double r_endo = radial(spec.endo_rx * endo_scale, spec.endo_ry * endo_scale);
      const double r_epi = radial(spec.epi_rx, spec.epi_ry);
      const std::size_t p = static_cast<std::size_t>(y) * spec.grid + x;
      if (r <= 0.7 * r_endo) rois.blood.push_back(p);
      if (r >= r_endo + margin && r <= r_epi - margin) rois.myocardium.push_back(p);
    }
  return rois;
}

double mean_t1_over(const T1Map& map, const std::vector<std::size_t>& roi) {
  double sum = 0;
  int count = 0;
  for (const auto p : roi)
    if (map.valid[p]) {
      sum += map.t1_ms[p];
      ++count;
    }
  return count > 0 ? sum / count : 0.0;
}

double mean_magnitude_over(const FrameStack& stack, int frame,
                           const std::vector<std::size_t>& roi) {
  if (roi.empty()) return 0.0;
  const cplx* f = stack.frame(frame);
  double sum = 0;
  for (const auto p : roi) sum += std::abs(f[p]);
  return sum / static_cast<double>(roi.size());
}

std::vector<std::string> cmd_map_t1(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  require_artifact(out / "checkpoint.json");
  require_artifact(out / "latents.csv");
  const auto state = io::load_checkpoint(out);
  const auto latents = io::load_latents(out);
  const auto schedule = make_schedule(cfg);

  const auto dict = build_folded_dictionary(cfg, schedule);
  io::save_dictionary(out, dict, "dictionary");
  const auto sweep = block_contrast_sweep(cfg, schedule);

  double freeze_resp, freeze_cardiac;
  if (cfg.map_freeze_frame >= 0) {
    const auto i = static_cast<std::size_t>(cfg.map_freeze_frame);
    if (i >= latents.resp.size())
      throw std::invalid_argument("map-t1: freeze frame out of range");
    freeze_resp = latents.resp[i];
    freeze_cardiac = latents.cardiac[i];
  } else {
    freeze_resp = percentile(latents.resp, 50.0);
    freeze_cardiac = percentile(latents.cardiac, cfg.map_cardiac_percentile);
  }

  const auto frames = excite_contrast_only(state.net, freeze_resp, freeze_cardiac, sweep);
  json extra;
  extra["freeze_resp"] = freeze_resp;
  extra["freeze_cardiac"] = freeze_cardiac;
  extra["contrast_sweep"] = sweep;
  io::save_frame_stack(out, frames, "t1_sweep", extra);

  const auto map = map_t1_image(frames, dict, cfg.map_bg_threshold);
  io::save_t1map(out, map, "t1map");

  // Agreement against the simulated truth.
  json report;
  std::vector<std::string> artifacts = {"dictionary.json", "dictionary_atoms.f32",
                                        "t1_sweep.json",   "t1_sweep.c64",
                                        "t1_sweep.pgm",    "t1map.f32",
                                        "t1map.json",      "t1map.pgm",
                                        "t1_report.json"};
  if (cfg.phantom_kind == "vials") {
    const auto rep = vial_t1_report(map, make_vial_spec(cfg));
    report["r_squared"] = rep.agreement.r_squared;
    report["icc_a1"] = rep.agreement.icc_a1;
    report["vial_truth_ms"] = rep.vial_truth_ms;
    report["vial_estimate_ms"] = rep.vial_estimate_ms;
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < rep.vial_truth_ms.size(); ++i)
      rows.push_back({static_cast<double>(i), rep.vial_truth_ms[i], rep.vial_estimate_ms[i]});
    io::write_csv(out / "t1_per_vial.csv", {"vial", "truth_ms", "estimate_ms"}, rows);
    artifacts.push_back("t1_per_vial.csv");
  } else {
    require_artifact(out / "truth.json");
    const auto truth = io::load_ground_truth(out);
    // Evaluate the ROI means at the motion state the excitation was frozen to:
    // the closest frame in latent space when a frame index was not given.
    int ref = cfg.map_freeze_frame;
    if (ref < 0) {
      double best = 1e300;
      for (std::size_t i = 0; i < latents.resp.size(); ++i) {
        const double d = std::abs(latents.resp[i] - freeze_resp) +
                         std::abs(latents.cardiac[i] - freeze_cardiac);
        if (d < best) {
          best = d;
          ref = static_cast<int>(i);
        }
      }
    }
    const auto spec = make_cardiac_spec(cfg);
    const auto rois =
        cardiac_rois(spec, truth.cardiac_signal[ref], truth.resp_signal[ref]);
    const double myo = mean_t1_over(map, rois.myocardium);
    const double blood = mean_t1_over(map, rois.blood);
    report["myocardium_t1_ms"] = myo;
    report["blood_t1_ms"] = blood;
    report["myocardium_truth_ms"] = cfg.t1_myocardium_ms;
    report["blood_truth_ms"] = cfg.t1_blood_ms;
    report["myocardium_rel_error"] = std::abs(myo - cfg.t1_myocardium_ms) / cfg.t1_myocardium_ms;
    report["blood_rel_error"] = std::abs(blood - cfg.t1_blood_ms) / cfg.t1_blood_ms;
    report["reference_frame"] = ref;
  }
  io::write_json(out / "t1_report.json", report);
  return artifacts;
}

std::vector<std::string> cmd_synth_cine(const RunConfig& cfg, const fs::path& out) {
  cfg.validate();
  if (cfg.phantom_kind != "cardiac")
    throw std::invalid_argument("synth-cine: requires the cardiac phantom");
  require_artifact(out / "checkpoint.json");
  require_artifact(out / "latents.csv");
  const auto state = io::load_checkpoint(out);
  const auto latents = io::load_latents(out);
  const auto schedule = make_schedule(cfg);

  const double resp_frozen = percentile(latents.resp, 50.0);
  const double card_lo = percentile(latents.cardiac, 5.0);
  const double card_hi = percentile(latents.cardiac, 95.0);
  std::vector<double> sweep(cfg.cine_frames);
  for (int k = 0; k < cfg.cine_frames; ++k) {
    const double mid = (card_lo + card_hi) / 2.0, amp = (card_hi - card_lo) / 2.0;
    sweep[k] = mid - amp * std::cos(2.0 * kPi * k / cfg.cine_frames);
  }

  const double c_bright = 0.98;
  const double c_black_blood = null_contrast_for_t1(cfg, schedule, cfg.t1_blood_ms);
  const double c_black_myo = null_contrast_for_t1(cfg, schedule, cfg.t1_myocardium_ms);

  const struct {
    const char* name;
    double contrast;
  } stacks[] = {{"cine_bright_blood", c_bright},
                {"cine_black_blood", c_black_blood},
                {"cine_black_myocardium", c_black_myo}};
  std::vector<std::string> artifacts;
  for (const auto& s : stacks) {
    const auto cine = excite_cine(state.net, resp_frozen, s.contrast, sweep);
    json extra;
    extra["contrast"] = s.contrast;
    extra["resp"] = resp_frozen;
    extra["cardiac_sweep"] = sweep;
    io::save_frame_stack(out, cine, s.name, extra);
    artifacts.push_back(std::string(s.name) + ".json");
    artifacts.push_back(std::string(s.name) + ".c64");
    artifacts.push_back(std::string(s.name) + ".pgm");
  }

  // Analytic six-sector LV wall report at the two extreme phases.
  const auto spec = make_cardiac_spec(cfg);
  SectorReport sectors;
  const EllipseShape epi{spec.heart_cx, spec.heart_cy, spec.epi_rx, spec.epi_ry};
  const EllipseShape endo_dia{spec.heart_cx, spec.heart_cy, spec.endo_rx, spec.endo_ry};
  const double sys_scale = 1.0 - spec.contraction;
  const EllipseShape endo_sys{spec.heart_cx, spec.heart_cy, spec.endo_rx * sys_scale,
                              spec.endo_ry * sys_scale};
  sectors.diastole_cm2 = sector_areas(endo_dia, epi, 6, 0.2, cfg.pixel_mm);
  sectors.systole_cm2 = sector_areas(endo_sys, epi, 6, 0.2, cfg.pixel_mm);

  json sj;
  sj["diastole_cm2"] = sectors.diastole_cm2;
  sj["systole_cm2"] = sectors.systole_cm2;
  sj["pixel_mm"] = cfg.pixel_mm;
  sj["border_fraction"] = 0.2;
  io::write_json(out / "sector_report.json", sj);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 6; ++i)
    rows.push_back({static_cast<double>(i + 1), sectors.diastole_cm2[i], sectors.systole_cm2[i]});
  io::write_csv(out / "sector_report.csv", {"sector", "diastole_cm2", "systole_cm2"}, rows);
  artifacts.push_back("sector_report.json");
  artifacts.push_back("sector_report.csv");
  return artifacts;
}

void write_manifest(const RunConfig& cfg, const fs::path& out,
                    const std::vector<std::string>& artifacts) {
  json m;
  m["tool"] = "spiralir";
  m["format_version"] = 1;
  m["seed"] = cfg.seed;
  m["config"] = config_to_text(cfg);
  json arts = json::array();
  std::vector<std::string> sorted = artifacts;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (const auto& a : sorted) {
    json e;
    e["path"] = a;
    e["bytes"] = fs::file_size(out / a);
    e["fnv1a64"] = io::hash_file(out / a);
    arts.push_back(e);
  }
  m["artifacts"] = arts;
  io::write_json(out / "manifest.json", m);
}

std::vector<std::string> run_all(const RunConfig& cfg, const fs::path& out) {
  std::vector<std::string> artifacts;
  auto append = [&](std::vector<std::string> v) {
    artifacts.insert(artifacts.end(), v.begin(), v.end());
  };
  append(cmd_simulate(cfg, out));
  append(cmd_estimate_motion(cfg, out));
  append(cmd_reconstruct(cfg, out));
  append(cmd_map_t1(cfg, out));
  if (cfg.phantom_kind == "cardiac") append(cmd_synth_cine(cfg, out));
  write_manifest(cfg, out, artifacts);
  artifacts.push_back("manifest.json");
  return artifacts;
}

}  // namespace spiralir
