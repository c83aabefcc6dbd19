#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spiralir/common.hpp"
#include "spiralir/trajectory.hpp"

namespace spiralir {

struct TissueParams {
  double t1_ms = 1000.0;
  double m0 = 1.0;
};

// Transverse readout amplitudes (Mz * sin(flip) convention) at readout times.
struct SignalEvolution {
  std::vector<double> times_ms;
  std::vector<double> values;
};

struct Dictionary {
  std::vector<double> t1_grid_ms;
  int atom_len = 0;
  std::vector<double> atoms;  // row-major, one unit-l2-norm atom per grid T1
  std::uint64_t schedule_hash = 0;

  const double* atom(int i) const { return atoms.data() + static_cast<std::size_t>(i) * atom_len; }
  int n_atoms() const { return static_cast<int>(t1_grid_ms.size()); }
};

struct MatchResult {
  double t1_ms = 0.0;
  double scale = 0.0;         // magnitude of the inner product with the winning atom
  double correlation = 0.0;   // |<s, a>| / ||s||, in [0, 1]
  bool valid = false;
};

struct T1Map {
  int h = 0, w = 0;
  std::vector<double> t1_ms;
  std::vector<double> correlation;
  std::vector<double> scale;
  std::vector<std::uint8_t> valid;
};

struct ThreeParamFit {
  double a = 0.0, b = 0.0, t1_star_ms = 0.0;
  double residual = 0.0;
  bool ok = false;  // false when T1* is unidentifiable (e.g. constant signal)
};

// Event-driven Bloch recursion for the IR-SPGR train: inversion flips Mz by
// -inv_efficiency, free T1 relaxation between events, each readout emits
// Mz*sin(flip) and then scales Mz by cos(flip). Perfect spoiling assumed.
SignalEvolution simulate_ir_spgr(const TrajectorySchedule& schedule, const TissueParams& tissue,
                                 double inv_efficiency = 1.0);

// Same recursion, emitting the longitudinal magnetization at each readout time
// (before the flip is applied). With flip = 0 this is the unperturbed IR curve.
SignalEvolution simulate_ir_spgr_mz(const TrajectorySchedule& schedule,
                                    const TissueParams& tissue, double inv_efficiency = 1.0);

// Closed-form SPGR steady state sin(a)*(1-E1)/(1-E1*cos(a)), E1 = exp(-tr/t1).
double steady_state_spgr(double t1_ms, double tr_ms, double flip_deg);

// Mean over consecutive groups of `binning` readouts; times are group means.
SignalEvolution bin_average(const SignalEvolution& s, int binning);

// Linearly interpolated time of the first sign change, if any.
std::optional<double> first_zero_crossing(const SignalEvolution& s);

// One simulated, bin-averaged, l2-normalized atom per grid T1 (m0 = 1).
Dictionary build_dictionary(const TrajectorySchedule& schedule,
                            const std::vector<double>& t1_grid_ms, int frame_binning,
                            double inv_efficiency = 1.0);

// Average the per-inversion-block segments of every atom into a single block
// and renormalize. Generator-synthesized sweeps live on this folded axis, so
// matching uses the block-mean fingerprint rather than any single block.
Dictionary fold_blocks(const Dictionary& dict, int n_blocks);

// argmax over atoms of |<s, a>| / ||s||; ties break toward smaller T1.
MatchResult match_fingerprint(std::span<const double> signal, const Dictionary& dict);
// Complex overload: |<s, a>| is invariant to a global phase, which also covers
// unresolved IR polarity.
MatchResult match_fingerprint(std::span<const cplx> signal, const Dictionary& dict);

// Least-squares fit of S(TI) = A - B*exp(-TI/T1*) by a T1* grid sweep plus
// golden-section refinement with a linear solve for (A, B) at each candidate.
ThreeParamFit fit_three_param(std::span<const double> ti_ms, std::span<const double> s);

// Look-Locker correction t1 = t1_star*(B/A - 1); nullopt when B/A <= 1.
std::optional<double> look_locker_correct(double a, double b, double t1_star_ms);

// Restore IR polarity of magnitude data by trying every prefix-negation and
// keeping the flip with the smallest three-parameter fit residual.
std::vector<double> restore_polarity_magnitude(std::span<const double> ti_ms,
                                               std::span<const double> magnitudes);

// Per-pixel match_fingerprint over a frame stack (n frames = atom length).
// Pixels whose series norm falls below bg_threshold * max-norm are invalid.
T1Map map_t1_image(const FrameStack& series, const Dictionary& dict,
                   double bg_threshold = 0.05);
T1Map map_t1_image(int n_frames, int h, int w, std::span<const double> series,
                   const Dictionary& dict, double bg_threshold = 0.05);

// Default dictionary grid: 100..3000 ms, step 10.
std::vector<double> default_t1_grid();
// Vial-phantom grid extended and refined at the low end: 10..100 step 2,
// 100..300 step 5, 300..3000 step 10.
std::vector<double> vial_t1_grid();

}  // namespace spiralir
