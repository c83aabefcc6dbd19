#include "spiralir/config.hpp"

#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace spiralir {

namespace {

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("config: bad numeric value '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  std::size_t pos = 0;
  const long v = std::stol(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("config: bad integer value '" + s + "'");
  return static_cast<int>(v);
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(15);
  ss << v;
  return ss.str();
}

#define NUM_FIELD(key, expr)                                                     \
  {key, Field{[](RunConfig& c, const std::string& s) { c.expr = to_double(s); }, \
              [](const RunConfig& c) { return fmt(c.expr); }}}
#define INT_FIELD(key, expr)                                                  \
  {key, Field{[](RunConfig& c, const std::string& s) { c.expr = to_int(s); }, \
              [](const RunConfig& c) { return std::to_string(c.expr); }}}
#define STR_FIELD(key, expr)                                           \
  {key, Field{[](RunConfig& c, const std::string& s) { c.expr = s; },  \
              [](const RunConfig& c) { return c.expr; }}}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      NUM_FIELD("seq.tr_ms", seq.tr_ms),
      NUM_FIELD("seq.flip_deg", seq.flip_deg),
      INT_FIELD("seq.interleaves_per_inversion", seq.interleaves_per_inversion),
      NUM_FIELD("seq.delay_ms", seq.delay_ms),
      INT_FIELD("seq.n_inversions", seq.n_inversions),
      INT_FIELD("seq.samples_per_interleaf", seq.samples_per_interleaf),
      INT_FIELD("seq.matrix", seq.matrix_size),
      NUM_FIELD("spiral.n_turns", spiral.n_turns),
      NUM_FIELD("spiral.k_max", spiral.k_max),
      STR_FIELD("phantom.kind", phantom_kind),
      NUM_FIELD("phantom.contraction", cardiac_contraction),
      NUM_FIELD("phantom.resp_amp_px", cardiac_resp_amp_px),
      NUM_FIELD("phantom.cardiac_freq_hz", cardiac_freq_hz),
      NUM_FIELD("phantom.resp_freq_hz", resp_freq_hz),
      NUM_FIELD("phantom.t1_myocardium_ms", t1_myocardium_ms),
      NUM_FIELD("phantom.t1_blood_ms", t1_blood_ms),
      NUM_FIELD("phantom.t1_background_ms", t1_background_ms),
      INT_FIELD("coils.count", n_coils),
      NUM_FIELD("noise.snr_db", snr_db),
      INT_FIELD("binning", binning),
      NUM_FIELD("nav.radius", nav_radius),
      NUM_FIELD("inv_efficiency", inv_efficiency),
      INT_FIELD("vae.epochs", vae_epochs),
      INT_FIELD("vae.batch", vae_batch),
      NUM_FIELD("vae.beta", vae_beta),
      NUM_FIELD("vae.lr", vae_lr),
      INT_FIELD("vae.hidden", vae_hidden),
      INT_FIELD("gen.epochs", gen_epochs),
      INT_FIELD("gen.batch", gen_batch),
      NUM_FIELD("gen.lr", gen_lr),
      NUM_FIELD("gen.lambda1", gen_lambda1),
      NUM_FIELD("gen.sigma_probe", gen_sigma_probe),
      NUM_FIELD("gen.param_multiple", gen_param_multiple),
      STR_FIELD("dict.grid", dict_grid),
      NUM_FIELD("map.bg_threshold", map_bg_threshold),
      INT_FIELD("map.freeze_frame", map_freeze_frame),
      NUM_FIELD("map.cardiac_percentile", map_cardiac_percentile),
      INT_FIELD("cine.frames", cine_frames),
      NUM_FIELD("pixel_mm", pixel_mm),
      {"seed", Field{[](RunConfig& c, const std::string& s) { c.seed = std::stoull(s); },
                     [](const RunConfig& c) { return std::to_string(c.seed); }}},
  };
  return table;
}

#undef NUM_FIELD
#undef INT_FIELD
#undef STR_FIELD

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  seq.validate();
  if (phantom_kind != "cardiac" && phantom_kind != "vials")
    throw std::invalid_argument("config: phantom.kind must be 'cardiac' or 'vials'");
  if (n_coils <= 0) throw std::invalid_argument("config: coils.count must be positive");
  if (binning <= 0 ||
      (seq.interleaves_per_inversion * seq.n_inversions) % binning != 0)
    throw std::invalid_argument("config: binning must divide the total interleaf count");
  if (nav_radius <= 0) throw std::invalid_argument("config: nav.radius must be positive");
  if (dict_grid != "auto" && dict_grid != "default" && dict_grid != "vials")
    throw std::invalid_argument("config: dict.grid must be auto, default, or vials");
  if (vae_epochs <= 0 || gen_epochs <= 0 || vae_batch <= 0 || gen_batch <= 0)
    throw std::invalid_argument("config: epoch and batch counts must be positive");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    apply_override(cfg, line);
  }
  return cfg;
}

void apply_override(RunConfig& cfg, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("config: override must be KEY=VALUE, got '" + key_value + "'");
  const std::string key = trim(key_value.substr(0, eq));
  const std::string value = trim(key_value.substr(eq + 1));
  const auto it = fields().find(key);
  if (it == fields().end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second.set(cfg, value);
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream ss;
  for (const auto& [key, field] : fields()) ss << key << " = " << field.get(cfg) << "\n";
  return ss.str();
}

CardiacPhantomSpec make_cardiac_spec(const RunConfig& cfg) {
  CardiacPhantomSpec spec;
  spec.grid = cfg.seq.matrix_size;
  const double s = cfg.seq.matrix_size / 64.0;
  spec.heart_cx = 30.0 * s;
  spec.heart_cy = 30.0 * s;
  spec.epi_rx = 17.0 * s;
  spec.epi_ry = 17.0 * s;
  spec.endo_rx = 10.0 * s;
  spec.endo_ry = 10.0 * s;
  spec.torso_rx = 29.0 * s;
  spec.torso_ry = 26.0 * s;
  spec.contraction = cfg.cardiac_contraction;
  spec.resp_amp_px = cfg.cardiac_resp_amp_px * s;
  spec.cardiac_freq_hz = cfg.cardiac_freq_hz;
  spec.resp_freq_hz = cfg.resp_freq_hz;
  spec.t1_myocardium_ms = cfg.t1_myocardium_ms;
  spec.t1_blood_ms = cfg.t1_blood_ms;
  spec.t1_background_ms = cfg.t1_background_ms;
  return spec;
}

VialPhantomSpec make_vial_spec(const RunConfig& cfg) {
  return default_vial_phantom(cfg.seq.matrix_size);
}

}  // namespace spiralir
