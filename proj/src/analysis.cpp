#include "spiralir/analysis.hpp"

#include <cmath>
#include <stdexcept>

namespace spiralir {

double r_squared(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size() || est.size() < 3)
    throw std::invalid_argument("r_squared: need >= 3 pairs");
  std::vector<double> a(est.begin(), est.end()), b(ref.begin(), ref.end());
  const double r = pearson(a, b);
  return r * r;
}

double icc_a1(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size() || est.size() < 3)
    throw std::invalid_argument("icc_a1: need >= 3 pairs");
  const int n = static_cast<int>(est.size());
  constexpr int k = 2;

  double grand = 0;
  for (int i = 0; i < n; ++i) grand += est[i] + ref[i];
  grand /= n * k;

  const double col_est = [&] {
    double s = 0;
    for (int i = 0; i < n; ++i) s += est[i];
    return s / n;
  }();
  const double col_ref = [&] {
    double s = 0;
    for (int i = 0; i < n; ++i) s += ref[i];
    return s / n;
  }();

  double ssr = 0, ssc = 0, sse = 0;
  ssc = n * ((col_est - grand) * (col_est - grand) + (col_ref - grand) * (col_ref - grand));
  for (int i = 0; i < n; ++i) {
    const double row = (est[i] + ref[i]) / 2.0;
    ssr += k * (row - grand) * (row - grand);
    const double re = est[i] - row - col_est + grand;
    const double rr = ref[i] - row - col_ref + grand;
    sse += re * re + rr * rr;
  }
  const double msr = ssr / (n - 1);
  const double msc = ssc / (k - 1);
  const double mse = sse / ((n - 1) * (k - 1));
  const double denom = msr + (k - 1) * mse + (static_cast<double>(k) / n) * (msc - mse);
  if (std::abs(denom) < 1e-30) throw std::invalid_argument("icc_a1: degenerate variance");
  return (msr - mse) / denom;
}

AgreementReport agreement_report(std::span<const double> est, std::span<const double> ref,
                                 std::vector<std::string> labels) {
  AgreementReport rep;
  rep.r_squared = r_squared(est, ref);
  rep.icc_a1 = icc_a1(est, ref);
  rep.estimate.assign(est.begin(), est.end());
  rep.reference.assign(ref.begin(), ref.end());
  rep.labels = std::move(labels);
  return rep;
}

namespace {

double radial_extent(const EllipseShape& e, double cos_t, double sin_t) {
  const double a = cos_t / e.rx, b = sin_t / e.ry;
  return 1.0 / std::sqrt(a * a + b * b);
}

}  // namespace

std::vector<double> sector_areas(const EllipseShape& endo, const EllipseShape& epi, int n_sectors,
                                 double border_fraction, double pixel_mm) {
  if (n_sectors < 1) throw std::invalid_argument("sector_areas: need >= 1 sector");
  if (border_fraction < 0 || border_fraction >= 0.5)
    throw std::invalid_argument("sector_areas: border_fraction must be in [0, 0.5)");
  if (std::abs(endo.cx - epi.cx) > 1e-9 || std::abs(endo.cy - epi.cy) > 1e-9)
    throw std::invalid_argument("sector_areas: ellipses must be concentric");
  if (endo.rx >= epi.rx || endo.ry >= epi.ry || endo.rx <= 0 || endo.ry <= 0)
    throw std::invalid_argument("sector_areas: endocardium must lie strictly inside epicardium");

  constexpr int ss = 4;
  const double inv = 1.0 / ss;
  const int x0 = static_cast<int>(std::floor(epi.cx - epi.rx)) - 1;
  const int x1 = static_cast<int>(std::ceil(epi.cx + epi.rx)) + 1;
  const int y0 = static_cast<int>(std::floor(epi.cy - epi.ry)) - 1;
  const int y1 = static_cast<int>(std::ceil(epi.cy + epi.ry)) + 1;

  std::vector<double> areas(n_sectors, 0.0);
  const double subpx = inv * inv;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double px = x + (sx + 0.5) * inv;
          const double py = y + (sy + 0.5) * inv;
          const double dx = px - epi.cx, dy = py - epi.cy;
          const double r = std::hypot(dx, dy);
          if (r <= 0) continue;
          const double ct = dx / r, st = dy / r;
          const double r_endo = radial_extent(endo, ct, st);
          const double r_epi = radial_extent(epi, ct, st);
          const double wall = r_epi - r_endo;
          const double inner = r_endo + border_fraction * wall;
          const double outer = r_epi - border_fraction * wall;
          if (r < inner || r > outer) continue;
          // Angle from 12 o'clock counterclockwise; image rows grow downward.
          double phi = std::atan2(-dy, dx) - kPi / 2.0;
          phi = std::fmod(phi + 4.0 * kPi, 2.0 * kPi);
          const int sector = std::min(n_sectors - 1,
                                      static_cast<int>(phi / (2.0 * kPi / n_sectors)));
          areas[sector] += subpx;
        }

  const double px_to_cm2 = (pixel_mm / 10.0) * (pixel_mm / 10.0);
  for (double& a : areas) a *= px_to_cm2;
  return areas;
}

MotionAgreement motion_agreement(const LatentSignals& latents,
                                 std::span<const double> cardiac_truth,
                                 std::span<const double> resp_truth) {
  if (latents.cardiac.size() != cardiac_truth.size() || latents.resp.size() != resp_truth.size())
    throw std::invalid_argument("motion_agreement: length mismatch");
  MotionAgreement out;
  out.cardiac_abs_pearson = align_sign_and_scale(latents.cardiac, cardiac_truth).abs_pearson;
  out.resp_abs_pearson = align_sign_and_scale(latents.resp, resp_truth).abs_pearson;
  return out;
}

}  // namespace spiralir
