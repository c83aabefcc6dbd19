#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spiralir/analysis.hpp"
#include "spiralir/config.hpp"
#include "spiralir/io.hpp"
#include "spiralir/manifold.hpp"

namespace spiralir {

namespace fs = std::filesystem;

// Pipeline stages. Each writes its artifacts under `out` and returns the
// relative artifact paths; exceptions carry diagnostics (std::invalid_argument
// for validation problems, std::runtime_error otherwise).
std::vector<std::string> cmd_simulate(const RunConfig& cfg, const fs::path& out);
std::vector<std::string> cmd_estimate_motion(const RunConfig& cfg, const fs::path& out);
std::vector<std::string> cmd_reconstruct(const RunConfig& cfg, const fs::path& out,
                                         bool resume = false);
std::vector<std::string> cmd_map_t1(const RunConfig& cfg, const fs::path& out);
std::vector<std::string> cmd_synth_cine(const RunConfig& cfg, const fs::path& out);

// Chains the five stages and writes manifest.json with content hashes.
std::vector<std::string> run_all(const RunConfig& cfg, const fs::path& out);

void write_manifest(const RunConfig& cfg, const fs::path& out,
                    const std::vector<std::string>& artifacts);

// Shared pieces, also used by the acceptance suite.

TrajectorySchedule make_schedule(const RunConfig& cfg);

// Dictionary on the full schedule folded to one inversion block, on the grid
// implied by the config.
Dictionary build_folded_dictionary(const RunConfig& cfg, const TrajectorySchedule& schedule);

// Contrast values at the bin centers of one inversion block (the dictionary
// time axis).
std::vector<double> block_contrast_sweep(const RunConfig& cfg,
                                         const TrajectorySchedule& schedule);

// Contrast value minimizing |signal| of the folded fingerprint for the given
// T1 (a signal-null pick for black-blood / black-myocardium CINE).
double null_contrast_for_t1(const RunConfig& cfg, const TrajectorySchedule& schedule,
                            double t1_ms);

struct VialReport {
  AgreementReport agreement;
  std::vector<double> vial_truth_ms, vial_estimate_ms;
};
// Per-vial mean estimated T1 over eroded analytic masks vs the vial truth.
VialReport vial_t1_report(const T1Map& map, const VialPhantomSpec& spec);

struct CardiacRois {
  std::vector<std::size_t> myocardium, blood;
};
// Eroded analytic masks at the given motion phases.
CardiacRois cardiac_rois(const CardiacPhantomSpec& spec, double cardiac_phase, double resp_phase);

double mean_t1_over(const T1Map& map, const std::vector<std::size_t>& roi);
double mean_magnitude_over(const FrameStack& stack, int frame,
                           const std::vector<std::size_t>& roi);

}  // namespace spiralir
