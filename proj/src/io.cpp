#include "spiralir/io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "artifact formats are defined little-endian");

namespace spiralir::io {

namespace {

void write_bytes(const fs::path& path, const void* data, std::size_t n) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open for reading: " + path.string());
  const auto n = f.tellg();
  f.seekg(0);
  std::vector<char> buf(static_cast<std::size_t>(n));
  f.read(buf.data(), n);
  if (!f) throw std::runtime_error("read failed: " + path.string());
  return buf;
}

}  // namespace

void write_f32(const fs::path& path, std::span<const float> v) {
  write_bytes(path, v.data(), v.size() * sizeof(float));
}

void write_f64(const fs::path& path, std::span<const double> v) {
  write_bytes(path, v.data(), v.size() * sizeof(double));
}

void write_c64(const fs::path& path, std::span<const cplx> v) {
  std::vector<float> flat(v.size() * 2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    flat[2 * i] = static_cast<float>(v[i].real());
    flat[2 * i + 1] = static_cast<float>(v[i].imag());
  }
  write_f32(path, flat);
}

std::vector<float> read_f32(const fs::path& path) {
  const auto buf = read_bytes(path);
  if (buf.size() % sizeof(float) != 0)
    throw std::runtime_error("corrupt float32 file: " + path.string());
  std::vector<float> v(buf.size() / sizeof(float));
  std::memcpy(v.data(), buf.data(), buf.size());
  return v;
}

std::vector<double> read_f64(const fs::path& path) {
  const auto buf = read_bytes(path);
  if (buf.size() % sizeof(double) != 0)
    throw std::runtime_error("corrupt float64 file: " + path.string());
  std::vector<double> v(buf.size() / sizeof(double));
  std::memcpy(v.data(), buf.data(), buf.size());
  return v;
}

std::vector<cplx> read_c64(const fs::path& path) {
  const auto flat = read_f32(path);
  if (flat.size() % 2 != 0) throw std::runtime_error("corrupt complex64 file: " + path.string());
  std::vector<cplx> v(flat.size() / 2);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = cplx(flat[2 * i], flat[2 * i + 1]);
  return v;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const auto text = read_text(path);
  return json::parse(text);
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, text.data(), text.size());
}

std::string read_text(const fs::path& path) {
  const auto buf = read_bytes(path);
  return std::string(buf.begin(), buf.end());
}

void write_pgm(const fs::path& path, const Grid<double>& img, double lo, double hi) {
  std::ostringstream head;
  head << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::string out = head.str();
  out.reserve(out.size() + img.size());
  const double span = hi > lo ? hi - lo : 1.0;
  for (const double v : img.v) {
    const double t = std::clamp((v - lo) / span, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
  }
  write_bytes(path, out.data(), out.size());
}

std::uint64_t hash_file(const fs::path& path) {
  const auto buf = read_bytes(path);
  return fnv1a64(buf.data(), buf.size());
}

void save_schedule(const fs::path& dir, const TrajectorySchedule& schedule,
                   const SpiralGeometry& geom) {
  const auto base = generate_archimedean_spiral(schedule.params.samples_per_interleaf,
                                                geom.n_turns, geom.k_max);
  std::vector<double> coords;
  coords.reserve(schedule.entries.size() * base.samples.size() * 2);
  for (const auto& e : schedule.entries) {
    const auto rot = rotated(base, e.rotation_deg);
    for (const auto& s : rot.samples) {
      coords.push_back(s[0]);
      coords.push_back(s[1]);
    }
  }
  write_f64(dir / "schedule_coords.f64", coords);

  json j;
  j["tr_ms"] = schedule.params.tr_ms;
  j["flip_deg"] = schedule.params.flip_deg;
  j["delay_ms"] = schedule.params.delay_ms;
  j["interleaves_per_inversion"] = schedule.params.interleaves_per_inversion;
  j["n_inversions"] = schedule.params.n_inversions;
  j["samples_per_interleaf"] = schedule.params.samples_per_interleaf;
  j["matrix_size"] = schedule.params.matrix_size;
  j["n_turns"] = geom.n_turns;
  j["k_max"] = geom.k_max;
  j["inversion_times_ms"] = schedule.inversion_times_ms;
  j["entry_count"] = schedule.entries.size();
  j["schedule_hash"] = schedule_hash(schedule);
  j["coords_layout"] = "entry-major float64 (kx, ky) pairs, normalized cycles/pixel";
  write_json(dir / "schedule.json", j);
}

void save_ground_truth(const fs::path& dir, const GroundTruth& truth) {
  write_c64(dir / "truth_frames.c64", truth.frames.v);
  std::vector<float> t1(truth.t1_map.v.begin(), truth.t1_map.v.end());
  write_f32(dir / "truth_t1.f32", t1);
  json j;
  j["n_frames"] = truth.frames.n;
  j["h"] = truth.frames.h;
  j["w"] = truth.frames.w;
  j["frame_times_ms"] = truth.frame_times_ms;
  j["cardiac_signal"] = truth.cardiac_signal;
  j["resp_signal"] = truth.resp_signal;
  j["t1_map_path"] = "truth_t1.f32";
  write_json(dir / "truth.json", j);
}

GroundTruth load_ground_truth(const fs::path& dir) {
  const auto j = read_json(dir / "truth.json");
  GroundTruth t;
  t.frames = FrameStack(j.at("n_frames").get<int>(), j.at("h").get<int>(), j.at("w").get<int>());
  t.frames.v = read_c64(dir / "truth_frames.c64");
  if (t.frames.v.size() != static_cast<std::size_t>(t.frames.n) * t.frames.frame_size())
    throw std::runtime_error("load_ground_truth: frame blob size mismatch");
  t.frame_times_ms = j.at("frame_times_ms").get<std::vector<double>>();
  t.cardiac_signal = j.at("cardiac_signal").get<std::vector<double>>();
  t.resp_signal = j.at("resp_signal").get<std::vector<double>>();
  const auto t1 = read_f32(dir / j.at("t1_map_path").get<std::string>());
  t.t1_map = Grid<double>(t.frames.h, t.frames.w);
  if (t1.size() != t.t1_map.size()) throw std::runtime_error("load_ground_truth: t1 map mismatch");
  std::copy(t1.begin(), t1.end(), t.t1_map.v.begin());
  return t;
}

void save_kspace(const fs::path& dir, const KSpaceSeries& series) {
  std::vector<cplx> data;
  std::vector<double> coords;
  std::vector<double> times;
  for (const auto& f : series.frames) {
    data.insert(data.end(), f.data.begin(), f.data.end());
    for (const auto& c : f.coords) {
      coords.push_back(c[0]);
      coords.push_back(c[1]);
    }
    times.push_back(f.frame_time_ms);
  }
  write_c64(dir / "kspace_data.c64", data);
  write_f64(dir / "kspace_coords.f64", coords);
  json j;
  j["n_frames"] = series.frames.size();
  j["n_coils"] = series.frames.empty() ? 0 : series.frames.front().n_coils;
  j["samples_per_frame"] = series.frames.empty() ? 0 : series.frames.front().coords.size();
  j["binning"] = series.binning;
  j["samples_per_interleaf"] = series.samples_per_interleaf;
  j["schedule_hash"] = series.schedule_hash;
  j["noise_sigma"] = series.noise_sigma;
  j["noise_seed"] = series.noise_seed;
  j["frame_times_ms"] = times;
  j["flip_deg"] = series.frames.empty() ? 0.0 : series.frames.front().flip_deg;
  write_json(dir / "kspace.json", j);
}

KSpaceSeries load_kspace(const fs::path& dir) {
  const auto j = read_json(dir / "kspace.json");
  const auto data = read_c64(dir / "kspace_data.c64");
  const auto coords = read_f64(dir / "kspace_coords.f64");
  KSpaceSeries s;
  const std::size_t n_frames = j.at("n_frames").get<std::size_t>();
  const int n_coils = j.at("n_coils").get<int>();
  const std::size_t spf = j.at("samples_per_frame").get<std::size_t>();
  s.binning = j.at("binning").get<int>();
  s.samples_per_interleaf = j.at("samples_per_interleaf").get<int>();
  s.schedule_hash = j.at("schedule_hash").get<std::uint64_t>();
  s.noise_sigma = j.at("noise_sigma").get<double>();
  s.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  const auto times = j.at("frame_times_ms").get<std::vector<double>>();
  const double flip = j.at("flip_deg").get<double>();
  if (data.size() != n_frames * n_coils * spf || coords.size() != n_frames * spf * 2 ||
      times.size() != n_frames)
    throw std::runtime_error("load_kspace: blob sizes inconsistent with sidecar");
  s.frames.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    auto& f = s.frames[i];
    f.n_coils = n_coils;
    f.frame_time_ms = times[i];
    f.flip_deg = flip;
    f.coords.resize(spf);
    for (std::size_t k = 0; k < spf; ++k)
      f.coords[k] = {coords[(i * spf + k) * 2], coords[(i * spf + k) * 2 + 1]};
    f.data.assign(data.begin() + static_cast<std::ptrdiff_t>(i * n_coils * spf),
                  data.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_coils * spf));
  }
  return s;
}

void save_coils(const fs::path& dir, const CoilMaps& coils) {
  write_c64(dir / "coils.c64", coils.v);
  json j;
  j["n_coils"] = coils.n_coils;
  j["h"] = coils.h;
  j["w"] = coils.w;
  write_json(dir / "coils.json", j);
}

CoilMaps load_coils(const fs::path& dir) {
  const auto j = read_json(dir / "coils.json");
  CoilMaps c;
  c.n_coils = j.at("n_coils").get<int>();
  c.h = j.at("h").get<int>();
  c.w = j.at("w").get<int>();
  c.v = read_c64(dir / "coils.c64");
  if (c.v.size() != static_cast<std::size_t>(c.n_coils) * c.h * c.w)
    throw std::runtime_error("load_coils: blob size mismatch");
  return c;
}

void save_dictionary(const fs::path& dir, const Dictionary& dict, const std::string& name) {
  std::vector<float> atoms(dict.atoms.begin(), dict.atoms.end());
  write_f32(dir / (name + "_atoms.f32"), atoms);
  json j;
  j["t1_grid_ms"] = dict.t1_grid_ms;
  j["atom_len"] = dict.atom_len;
  j["schedule_hash"] = dict.schedule_hash;
  write_json(dir / (name + ".json"), j);
}

Dictionary load_dictionary(const fs::path& dir, const std::string& name) {
  const auto j = read_json(dir / (name + ".json"));
  Dictionary d;
  d.t1_grid_ms = j.at("t1_grid_ms").get<std::vector<double>>();
  d.atom_len = j.at("atom_len").get<int>();
  d.schedule_hash = j.at("schedule_hash").get<std::uint64_t>();
  const auto atoms = read_f32(dir / (name + "_atoms.f32"));
  if (atoms.size() != d.t1_grid_ms.size() * static_cast<std::size_t>(d.atom_len))
    throw std::runtime_error("load_dictionary: atom blob size mismatch");
  d.atoms.assign(atoms.begin(), atoms.end());
  return d;
}

void save_t1map(const fs::path& dir, const T1Map& map, const std::string& name) {
  std::vector<float> t1(map.t1_ms.begin(), map.t1_ms.end());
  write_f32(dir / (name + ".f32"), t1);
  Grid<double> preview(map.h, map.w);
  double hi = 0;
  for (std::size_t p = 0; p < preview.size(); ++p) {
    preview.v[p] = map.valid[p] ? map.t1_ms[p] : 0.0;
    hi = std::max(hi, preview.v[p]);
  }
  write_pgm(dir / (name + ".pgm"), preview, 0.0, hi > 0 ? hi : 1.0);
  json j;
  j["h"] = map.h;
  j["w"] = map.w;
  j["valid"] = map.valid;
  j["correlation"] = map.correlation;
  j["scale"] = map.scale;
  write_json(dir / (name + ".json"), j);
}

T1Map load_t1map(const fs::path& dir, const std::string& name) {
  const auto j = read_json(dir / (name + ".json"));
  T1Map m;
  m.h = j.at("h").get<int>();
  m.w = j.at("w").get<int>();
  m.valid = j.at("valid").get<std::vector<std::uint8_t>>();
  m.correlation = j.at("correlation").get<std::vector<double>>();
  m.scale = j.at("scale").get<std::vector<double>>();
  const auto t1 = read_f32(dir / (name + ".f32"));
  m.t1_ms.assign(t1.begin(), t1.end());
  if (m.t1_ms.size() != static_cast<std::size_t>(m.h) * m.w)
    throw std::runtime_error("load_t1map: blob size mismatch");
  return m;
}

void save_latents(const fs::path& dir, const LatentSignals& latents,
                  std::span<const double> frame_times_ms) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < latents.cardiac.size(); ++i)
    rows.push_back({frame_times_ms[i], latents.cardiac[i], latents.resp[i]});
  write_csv(dir / "latents.csv", {"frame_time_ms", "cardiac", "resp"}, rows);
  json j;
  j["cardiac_peak_hz"] = latents.cardiac_peak_hz;
  j["resp_peak_hz"] = latents.resp_peak_hz;
  j["cardiac_channel"] = latents.cardiac_channel;
  j["resp_channel"] = latents.resp_channel;
  j["labeling_ok"] = latents.labeling_ok;
  j["labeling_note"] = latents.labeling_note;
  write_json(dir / "latents.json", j);
}

LatentSignals load_latents(const fs::path& dir, std::vector<double>* frame_times_ms) {
  const auto text = read_text(dir / "latents.csv");
  LatentSignals l;
  std::istringstream ss(text);
  std::string line;
  std::getline(ss, line);  // header
  if (frame_times_ms) frame_times_ms->clear();
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    double t, c, r;
    char comma;
    ls >> t >> comma >> c >> comma >> r;
    if (frame_times_ms) frame_times_ms->push_back(t);
    l.cardiac.push_back(c);
    l.resp.push_back(r);
  }
  const auto j = read_json(dir / "latents.json");
  l.cardiac_peak_hz = j.at("cardiac_peak_hz").get<double>();
  l.resp_peak_hz = j.at("resp_peak_hz").get<double>();
  l.cardiac_channel = j.at("cardiac_channel").get<int>();
  l.resp_channel = j.at("resp_channel").get<int>();
  l.labeling_ok = j.at("labeling_ok").get<bool>();
  l.labeling_note = j.at("labeling_note").get<std::string>();
  return l;
}

namespace {

json defs_to_json(const std::vector<nn::LayerDef>& defs) {
  json arr = json::array();
  for (const auto& d : defs) {
    json e;
    e["op"] = nn::op_name(d.op);
    e["out_c"] = d.out.c;
    e["out_h"] = d.out.h;
    e["out_w"] = d.out.w;
    arr.push_back(e);
  }
  return arr;
}

std::vector<nn::LayerDef> defs_from_json(const json& arr) {
  std::vector<nn::LayerDef> defs;
  for (const auto& e : arr) {
    nn::LayerDef d;
    d.op = nn::op_from_name(e.at("op").get<std::string>());
    d.out = {e.at("out_c").get<int>(), e.at("out_h").get<int>(), e.at("out_w").get<int>()};
    defs.push_back(d);
  }
  return defs;
}

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainState& state, const GeneratorConfig& cfg,
                     std::uint64_t seed, const json& extra) {
  write_f32(dir / "checkpoint_params.f32", state.net.get_params());
  write_f32(dir / "checkpoint_adam_m.f32", state.adam.m);
  write_f32(dir / "checkpoint_adam_v.f32", state.adam.v);
  json j;
  j["arch"] = defs_to_json(cfg.defs);
  j["matrix"] = cfg.matrix;
  j["latent_dim"] = cfg.latent_dim;
  j["param_count"] = cfg.param_count;
  j["epoch"] = state.epoch;
  j["adam_t"] = state.adam.t;
  j["lambda1"] = state.lambda1;
  j["data_scale"] = state.data_scale;
  j["seed"] = seed;
  j["extra"] = extra;
  write_json(dir / "checkpoint.json", j);
}

TrainState load_checkpoint(const fs::path& dir, GeneratorConfig* cfg_out, json* extra_out) {
  const auto j = read_json(dir / "checkpoint.json");
  GeneratorConfig cfg;
  cfg.matrix = j.at("matrix").get<int>();
  cfg.latent_dim = j.at("latent_dim").get<int>();
  cfg.defs = defs_from_json(j.at("arch"));
  cfg.param_count = j.at("param_count").get<std::size_t>();

  TrainState st;
  st.net = nn::init_network<float>(cfg.defs, {cfg.latent_dim, 1, 1}, 0);
  const auto params = read_f32(dir / "checkpoint_params.f32");
  st.net.set_params(params);
  st.adam.m = read_f32(dir / "checkpoint_adam_m.f32");
  st.adam.v = read_f32(dir / "checkpoint_adam_v.f32");
  st.adam.t = j.at("adam_t").get<std::int64_t>();
  st.epoch = j.at("epoch").get<int>();
  st.lambda1 = j.at("lambda1").get<double>();
  st.data_scale = j.at("data_scale").get<double>();
  if (cfg_out) *cfg_out = cfg;
  if (extra_out) *extra_out = j.value("extra", json::object());
  return st;
}

void save_frame_stack(const fs::path& dir, const FrameStack& stack, const std::string& name,
                      const json& extra) {
  write_c64(dir / (name + ".c64"), stack.v);
  json j;
  j["n_frames"] = stack.n;
  j["h"] = stack.h;
  j["w"] = stack.w;
  j["extra"] = extra;
  write_json(dir / (name + ".json"), j);

  // Mid-stack magnitude preview.
  if (stack.n > 0) {
    Grid<double> mag(stack.h, stack.w);
    const cplx* f = stack.frame(stack.n / 2);
    double hi = 0;
    for (std::size_t p = 0; p < mag.size(); ++p) {
      mag.v[p] = std::abs(f[p]);
      hi = std::max(hi, mag.v[p]);
    }
    write_pgm(dir / (name + ".pgm"), mag, 0.0, hi > 0 ? hi : 1.0);
  }
}

FrameStack load_frame_stack(const fs::path& dir, const std::string& name) {
  const auto j = read_json(dir / (name + ".json"));
  FrameStack s(j.at("n_frames").get<int>(), j.at("h").get<int>(), j.at("w").get<int>());
  s.v = read_c64(dir / (name + ".c64"));
  if (s.v.size() != static_cast<std::size_t>(s.n) * s.frame_size())
    throw std::runtime_error("load_frame_stack: blob size mismatch");
  return s;
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < header.size(); ++i) ss << (i ? "," : "") << header[i];
  ss << "\n";
  ss.precision(12);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) ss << (i ? "," : "") << row[i];
    ss << "\n";
  }
  write_text(path, ss.str());
}

}  // namespace spiralir::io
