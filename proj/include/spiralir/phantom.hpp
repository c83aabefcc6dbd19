#pragma once

#include <span>
#include <string>
#include <vector>

#include "spiralir/common.hpp"
#include "spiralir/relaxometry.hpp"
#include "spiralir/trajectory.hpp"

namespace spiralir {

struct Vial {
  double cx = 0, cy = 0, radius = 0;  // pixels
  double t1_ms = 0;
};

struct VialPhantomSpec {
  int grid = 64;
  std::vector<Vial> vials;       // 14 disjoint vials
  double background_m0 = 0.0;    // signal-free background by default
  double vial_m0 = 1.0;

  void validate() const;
};

struct CardiacPhantomSpec {
  int grid = 64;
  double heart_cx = 30, heart_cy = 30;   // pixels
  double epi_rx = 17, epi_ry = 17;
  double endo_rx = 10, endo_ry = 10;
  double torso_rx = 29, torso_ry = 26;
  double contraction = 0.3;              // fraction of endocardial radius at full systole
  double resp_amp_px = 3.0;              // vertical translation amplitude
  double cardiac_freq_hz = 1.2;
  double resp_freq_hz = 0.25;
  double t1_myocardium_ms = 1000;
  double t1_blood_ms = 1600;
  double t1_background_ms = 600;         // liver-like tissue surrounding the heart
  double m0 = 1.0;

  void validate() const;
};

struct GroundTruth {
  FrameStack frames;
  std::vector<double> cardiac_signal;  // in [-1, 1]
  std::vector<double> resp_signal;
  std::vector<double> frame_times_ms;
  Grid<double> t1_map;                 // 0 marks signal-free pixels
};

// cardiac = sin(2*pi*f_c*t), resp = sin(2*pi*f_r*t).
std::pair<std::vector<double>, std::vector<double>> motion_waveforms(
    std::span<const double> frame_times_ms, const CardiacPhantomSpec& spec);

// Per-tissue coverage fractions via 4x supersampled rasterization; fractions
// sum to 1 per pixel with the remainder assigned to tissue 0 (vacuum).
// Cardiac tissue order: {vacuum, background, myocardium, blood}.
std::vector<Grid<double>> render_fractions(const CardiacPhantomSpec& spec, double cardiac_phase,
                                           double resp_phase);
// Vial tissue order: {vacuum/background, vial_0, ..., vial_13}.
std::vector<Grid<double>> render_fractions(const VialPhantomSpec& spec);

// Pixel value = sum over tissues of coverage * amplitude (real, phase 0).
Grid<cplx> render_frame(const CardiacPhantomSpec& spec, double cardiac_phase, double resp_phase,
                        std::span<const double> tissue_amplitudes);

// Bloch-simulate each tissue over the schedule, bin-average, and render each
// frame
// at its bin-center motion phase. Tissue amplitude order matches
// render_fractions minus the vacuum channel.
GroundTruth generate_ground_truth(const CardiacPhantomSpec& spec,
                                  const TrajectorySchedule& schedule, int binning,
                                  double inv_efficiency = 1.0);
GroundTruth generate_ground_truth(const VialPhantomSpec& spec, const TrajectorySchedule& schedule,
                                  int binning, double inv_efficiency = 1.0);

// 14 vials on two rings, T1 on a geometric ladder from 22 ms to 2480 ms.
VialPhantomSpec default_vial_phantom(int grid = 64);

}  // namespace spiralir
