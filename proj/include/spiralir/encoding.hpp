#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "spiralir/common.hpp"
#include "spiralir/phantom.hpp"
#include "spiralir/trajectory.hpp"

namespace spiralir {

struct CoilMaps {
  int n_coils = 0, h = 0, w = 0;
  std::vector<cplx> v;  // coil-major

  const cplx* coil(int c) const { return v.data() + static_cast<std::size_t>(c) * h * w; }
  cplx* coil(int c) { return v.data() + static_cast<std::size_t>(c) * h * w; }
};

// Gaussian magnitude lobes around the FOV with smooth low-order phase,
// normalized so the sum-of-squares magnitude is exactly 1 at every pixel.
CoilMaps synthetic_coil_maps(int n_coils, int h, int w);

struct SpiralGeometry {
  double n_turns = 8.0;
  double k_max = 0.5;
};

struct KSpaceFrame {
  std::vector<std::array<double, 2>> coords;
  std::vector<cplx> data;  // n_coils x n_samples, coil-major
  int n_coils = 0;
  double frame_time_ms = 0.0;
  double flip_deg = 0.0;

  int n_samples() const { return static_cast<int>(coords.size()); }
  const cplx* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * coords.size(); }
  cplx* channel(int c) { return data.data() + static_cast<std::size_t>(c) * coords.size(); }
};

struct KSpaceSeries {
  std::vector<KSpaceFrame> frames;
  int binning = 1;
  int samples_per_interleaf = 0;
  std::uint64_t schedule_hash = 0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

// Separable phase tables for the exact type-2 NUDFT on centered pixel
// coordinates: ex[j][x] = exp(-i*2*pi*kx_j*(x - w/2)), ey likewise in y.
template <typename T>
struct NudftTables {
  int h = 0, w = 0, ns = 0;
  std::vector<T> ex_re, ex_im, ey_re, ey_im;
};

template <typename T>
NudftTables<T> nudft_tables(std::span<const std::array<double, 2>> coords, int h, int w);

// Single-plane transforms on split re/im buffers. forward computes
// out[j] = sum_r g(r) exp(-i*2*pi*k_j.r); adjoint is its exact conjugate
// transpose, accumulating into g.
template <typename T>
void nudft_forward_plane(const NudftTables<T>& tb, const T* g_re, const T* g_im, T* out_re,
                         T* out_im);
template <typename T>
void nudft_adjoint_plane(const NudftTables<T>& tb, const T* d_re, const T* d_im, T* g_re,
                         T* g_im);

extern template struct NudftTables<float>;
extern template struct NudftTables<double>;

// Multicoil operators of the measurement model b = A(x) + n.
void nudft_forward(std::span<const cplx> image, std::span<const std::array<double, 2>> coords,
                   const CoilMaps& coils, std::span<cplx> out_data);
void nudft_adjoint(std::span<const cplx> data, std::span<const std::array<double, 2>> coords,
                   const CoilMaps& coils, std::span<cplx> out_image);

// Per-frame coordinates and mean interleaf times after binning.
struct BinnedTrajectory {
  std::vector<std::vector<std::array<double, 2>>> frame_coords;
  std::vector<double> frame_times_ms;
};
BinnedTrajectory bin_trajectory(const TrajectorySchedule& schedule, const SpiralGeometry& geom,
                                int binning);

// Forward-encode every ground-truth frame on its binned coordinates and add
// i.i.d. complex Gaussian noise (sigma per real/imag component) when sigma > 0.
KSpaceSeries simulate_acquisition(const GroundTruth& truth, const TrajectorySchedule& schedule,
                                  const SpiralGeometry& geom, const CoilMaps& coils,
                                  double noise_sigma, std::uint64_t seed);

void add_complex_noise(KSpaceSeries& series, double sigma, std::uint64_t seed);
double series_l2(const KSpaceSeries& series);
std::size_t series_sample_count(const KSpaceSeries& series);  // complex entries incl. coils
// sigma = ||b|| / (sqrt(2 N) * 10^(snr/20)) for the given clean series.
double sigma_for_snr_db(const KSpaceSeries& clean, double snr_db);

// Ramp density-compensation weights for one binned frame, normalized to sum 1.
std::vector<double> frame_dcf_weights(const KSpaceFrame& frame);

// Rough reconstruction A^H W b, calibrated on a centered delta so that pixel
// amplitudes are comparable to the underlying image. Used for preview images
// and for pre-normalizing measurements before tanh-bounded training.
Grid<cplx> dcf_adjoint_image(const KSpaceFrame& frame, const CoilMaps& coils);

// Per-frame navigator: re/im of every sample with ||k|| <= radius, ordered by
// (coil, interleaf, sample), then z-scored per component across frames.
std::vector<std::vector<double>> extract_navigator(const KSpaceSeries& series, double radius);

}  // namespace spiralir
