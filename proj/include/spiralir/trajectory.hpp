#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "spiralir/common.hpp"

namespace spiralir {

// One spiral readout. Coordinates are normalized cycles/pixel in [-0.5, 0.5]^2,
// spiral-out: first sample at the k-space origin, radius non-decreasing.
struct SpiralInterleaf {
  std::vector<std::array<double, 2>> samples;
  double rotation_deg = 0.0;

  int sample_count() const { return static_cast<int>(samples.size()); }
};

struct SequenceParams {
  double tr_ms = 8.0;
  double flip_deg = 14.0;
  int interleaves_per_inversion = 800;
  double delay_ms = 500.0;
  int n_inversions = 5;
  int samples_per_interleaf = 256;
  int matrix_size = 64;

  double block_duration_ms() const { return interleaves_per_inversion * tr_ms; }
  // Throws std::invalid_argument on any out-of-range field.
  void validate() const;
};

struct ScheduleEntry {
  double time_ms = 0.0;
  int interleaf_index = 0;
  double rotation_deg = 0.0;
  bool post_inversion_first_readout = false;
};

struct TrajectorySchedule {
  std::vector<ScheduleEntry> entries;
  std::vector<double> inversion_times_ms;
  SequenceParams params;
};

inline constexpr double kGoldenAngleDeg = 137.5;

// Archimedean spiral with linear radius ramp: sample s of S lies at radius
// k_max*s/(S-1) and angle 2*pi*n_turns*s/(S-1) + rotation, so the endpoint
// reaches k_max exactly.
SpiralInterleaf generate_archimedean_spiral(int samples_per_interleaf, double n_turns,
                                            double k_max, double rotation_deg = 0.0);

// Rigid rotation of the interleaf about the k-space origin.
SpiralInterleaf rotated(const SpiralInterleaf& interleaf, double rotation_deg);

// One entry per readout, tr_ms apart within each inversion block, blocks
// separated by delay_ms; global interleaf i carries rotation (i*137.5) mod 360.
TrajectorySchedule golden_angle_schedule(const SequenceParams& p);

// Ramp-like per-sample weights proportional to ||k|| with a finite floor at the
// origin, normalized to sum to 1 over the interleaf.
std::vector<double> density_compensation(const SpiralInterleaf& interleaf);

// Identity of the generating schedule, stable across runs.
std::uint64_t schedule_hash(const TrajectorySchedule& s);

}  // namespace spiralir
