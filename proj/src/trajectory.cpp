#include "spiralir/trajectory.hpp"

#include <cmath>
#include <stdexcept>

namespace spiralir {

void SequenceParams::validate() const {
  if (tr_ms <= 0) throw std::invalid_argument("SequenceParams: tr_ms must be positive");
  if (flip_deg <= 0 || flip_deg > 90)
    throw std::invalid_argument("SequenceParams: flip_deg must be in (0, 90]");
  if (interleaves_per_inversion <= 0)
    throw std::invalid_argument("SequenceParams: interleaves_per_inversion must be positive");
  if (delay_ms < 0) throw std::invalid_argument("SequenceParams: delay_ms must be non-negative");
  if (n_inversions <= 0)
    throw std::invalid_argument("SequenceParams: n_inversions must be positive");
  if (samples_per_interleaf < 2)
    throw std::invalid_argument("SequenceParams: samples_per_interleaf must be >= 2");
  if (matrix_size <= 0)
    throw std::invalid_argument("SequenceParams: matrix_size must be positive");
}

SpiralInterleaf generate_archimedean_spiral(int samples_per_interleaf, double n_turns,
                                            double k_max, double rotation_deg) {
  if (samples_per_interleaf < 2)
    throw std::invalid_argument("generate_archimedean_spiral: need at least 2 samples");
  if (!(k_max > 0.0) || k_max > 0.5)
    throw std::invalid_argument("generate_archimedean_spiral: k_max must be in (0, 0.5]");
  if (!(n_turns > 0.0))
    throw std::invalid_argument("generate_archimedean_spiral: n_turns must be positive");

  SpiralInterleaf out;
  out.rotation_deg = rotation_deg;
  out.samples.resize(samples_per_interleaf);
  const double denom = samples_per_interleaf - 1;
  const double phi = rotation_deg * kPi / 180.0;
  for (int s = 0; s < samples_per_interleaf; ++s) {
    const double u = s / denom;
    const double r = k_max * u;
    const double a = 2.0 * kPi * n_turns * u + phi;
    out.samples[s] = {r * std::cos(a), r * std::sin(a)};
  }
  return out;
}

SpiralInterleaf rotated(const SpiralInterleaf& interleaf, double rotation_deg) {
  SpiralInterleaf out;
  out.rotation_deg = interleaf.rotation_deg + rotation_deg;
  out.samples.resize(interleaf.samples.size());
  const double phi = rotation_deg * kPi / 180.0;
  const double c = std::cos(phi), s = std::sin(phi);
  for (std::size_t i = 0; i < interleaf.samples.size(); ++i) {
    const auto [kx, ky] = interleaf.samples[i];
    out.samples[i] = {c * kx - s * ky, s * kx + c * ky};
  }
  return out;
}

TrajectorySchedule golden_angle_schedule(const SequenceParams& p) {
  p.validate();
  TrajectorySchedule sched;
  sched.params = p;
  sched.entries.reserve(static_cast<std::size_t>(p.n_inversions) * p.interleaves_per_inversion);
  const double period_ms = p.block_duration_ms() + p.delay_ms;
  int global = 0;
  for (int b = 0; b < p.n_inversions; ++b) {
    const double inv_time = b * period_ms;
    sched.inversion_times_ms.push_back(inv_time);
    for (int j = 0; j < p.interleaves_per_inversion; ++j, ++global) {
      ScheduleEntry e;
      e.time_ms = inv_time + (j + 1) * p.tr_ms;
      e.interleaf_index = global;
      e.rotation_deg = std::fmod(global * kGoldenAngleDeg, 360.0);
      e.post_inversion_first_readout = (j == 0);
      sched.entries.push_back(e);
    }
  }
  return sched;
}

std::vector<double> density_compensation(const SpiralInterleaf& interleaf) {
  const int n = interleaf.sample_count();
  if (n < 1) throw std::invalid_argument("density_compensation: empty interleaf");
  std::vector<double> w(n);
  double k_max = 0.0;
  for (const auto& s : interleaf.samples)
    k_max = std::max(k_max, std::hypot(s[0], s[1]));
  // Floor at half the mean radial step so the origin sample keeps finite weight.
  const double floor_r = n > 1 ? 0.5 * k_max / (n - 1) : 1.0;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = std::hypot(interleaf.samples[i][0], interleaf.samples[i][1]);
    w[i] = std::max(r, floor_r);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

std::uint64_t schedule_hash(const TrajectorySchedule& s) {
  std::uint64_t h = fnv1a64("spiralir.schedule");
  const double fields[] = {s.params.tr_ms,
                           s.params.flip_deg,
                           static_cast<double>(s.params.interleaves_per_inversion),
                           s.params.delay_ms,
                           static_cast<double>(s.params.n_inversions),
                           static_cast<double>(s.params.samples_per_interleaf),
                           static_cast<double>(s.params.matrix_size)};
  h = fnv1a64(fields, sizeof(fields), h);
  for (const auto& e : s.entries) {
    const double row[] = {e.time_ms, static_cast<double>(e.interleaf_index), e.rotation_deg};
    h = fnv1a64(row, sizeof(row), h);
  }
  return h;
}

}  // namespace spiralir
