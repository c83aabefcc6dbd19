#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spiralir/common.hpp"
#include "spiralir/encoding.hpp"
#include "spiralir/manifold.hpp"
#include "spiralir/motion.hpp"
#include "spiralir/nn.hpp"
#include "spiralir/phantom.hpp"
#include "spiralir/relaxometry.hpp"
#include "spiralir/trajectory.hpp"

namespace spiralir::io {

namespace fs = std::filesystem;
using nlohmann::json;

// Raw little-endian arrays. Complex data is stored as float32 (re, im) pairs.
void write_f32(const fs::path& path, std::span<const float> v);
void write_f64(const fs::path& path, std::span<const double> v);
void write_c64(const fs::path& path, std::span<const cplx> v);
std::vector<float> read_f32(const fs::path& path);
std::vector<double> read_f64(const fs::path& path);
std::vector<cplx> read_c64(const fs::path& path);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

// 8-bit grayscale PGM, values clamped to [lo, hi].
void write_pgm(const fs::path& path, const Grid<double>& img, double lo, double hi);

std::uint64_t hash_file(const fs::path& path);

// Composite artifact formats (binary blob + JSON sidecar).
void save_schedule(const fs::path& dir, const TrajectorySchedule& schedule,
                   const SpiralGeometry& geom);

void save_ground_truth(const fs::path& dir, const GroundTruth& truth);
GroundTruth load_ground_truth(const fs::path& dir);

void save_kspace(const fs::path& dir, const KSpaceSeries& series);
KSpaceSeries load_kspace(const fs::path& dir);

void save_coils(const fs::path& dir, const CoilMaps& coils);
CoilMaps load_coils(const fs::path& dir);

void save_dictionary(const fs::path& dir, const Dictionary& dict, const std::string& name);
Dictionary load_dictionary(const fs::path& dir, const std::string& name);

void save_t1map(const fs::path& dir, const T1Map& map, const std::string& name);
T1Map load_t1map(const fs::path& dir, const std::string& name);

void save_latents(const fs::path& dir, const LatentSignals& latents,
                  std::span<const double> frame_times_ms);
LatentSignals load_latents(const fs::path& dir, std::vector<double>* frame_times_ms = nullptr);

// Trained-generator checkpoint: float32 parameter blob + architecture
// descriptor + optimizer state, enough to resume or excite.
void save_checkpoint(const fs::path& dir, const TrainState& state, const GeneratorConfig& cfg,
                     std::uint64_t seed, const json& extra = json::object());
TrainState load_checkpoint(const fs::path& dir, GeneratorConfig* cfg_out = nullptr,
                           json* extra_out = nullptr);

void save_frame_stack(const fs::path& dir, const FrameStack& stack, const std::string& name,
                      const json& extra = json::object());
FrameStack load_frame_stack(const fs::path& dir, const std::string& name);

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace spiralir::io
