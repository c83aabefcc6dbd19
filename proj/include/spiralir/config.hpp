#pragma once

#include <cstdint>
#include <string>

#include "spiralir/encoding.hpp"
#include "spiralir/phantom.hpp"
#include "spiralir/trajectory.hpp"

namespace spiralir {

// Flat key = value run description; see configs/ for annotated examples.
struct RunConfig {
  SequenceParams seq;
  SpiralGeometry spiral;

  std::string phantom_kind = "cardiac";  // "cardiac" or "vials"
  double cardiac_contraction = 0.3;
  double cardiac_resp_amp_px = 3.0;
  double cardiac_freq_hz = 1.2;
  double resp_freq_hz = 0.25;
  double t1_myocardium_ms = 1000.0;
  double t1_blood_ms = 1600.0;
  double t1_background_ms = 600.0;

  int n_coils = 4;
  double snr_db = 30.0;
  int binning = 5;
  // Origin samples only: navigator content at ||k|| > 0 varies with the
  // golden-angle rotation, which swamps the motion signal.
  double nav_radius = 0.001;
  double inv_efficiency = 1.0;

  int vae_epochs = 400;
  int vae_batch = 64;
  double vae_beta = 1e-2;
  double vae_lr = 1e-3;
  int vae_hidden = 64;

  int gen_epochs = 500;
  int gen_batch = 20;
  double gen_lr = 1e-4;
  double gen_lambda1 = -1.0;  // auto
  double gen_sigma_probe = 0.1;
  double gen_param_multiple = 15.0;

  std::string dict_grid = "auto";  // auto | default | vials
  double map_bg_threshold = 0.05;
  int map_freeze_frame = -1;  // -1: percentile-based selection
  double map_cardiac_percentile = 10.0;

  int cine_frames = 33;
  double pixel_mm = 3.0;

  std::uint64_t seed = 1234;

  void validate() const;
};

RunConfig parse_config(const std::string& text);
std::string config_to_text(const RunConfig& cfg);
// Apply a single "key=value" override.
void apply_override(RunConfig& cfg, const std::string& key_value);

// Phantom specs implied by the config (cardiac geometry scales with matrix).
CardiacPhantomSpec make_cardiac_spec(const RunConfig& cfg);
VialPhantomSpec make_vial_spec(const RunConfig& cfg);

}  // namespace spiralir
