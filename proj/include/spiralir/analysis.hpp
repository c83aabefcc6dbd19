#pragma once

#include <span>
#include <vector>

#include "spiralir/common.hpp"
#include "spiralir/motion.hpp"

namespace spiralir {

struct AgreementReport {
  double r_squared = 0.0;
  double icc_a1 = 0.0;
  std::vector<double> estimate, reference;
  std::vector<std::string> labels;
};

struct EllipseShape {
  double cx = 0, cy = 0, rx = 0, ry = 0;
};

// Six sector areas (cm^2) for one cardiac phase, sector 1 starting at
// 12 o'clock and counting counterclockwise.
struct SectorReport {
  std::vector<double> diastole_cm2;
  std::vector<double> systole_cm2;
};

// Squared Pearson correlation of the pairs.
double r_squared(std::span<const double> est, std::span<const double> ref);

// ICC(A,1): two-way model, absolute agreement, single measurement,
// (MSR - MSE) / (MSR + (k-1) MSE + (k/n)(MSC - MSE)) with k = 2 raters.
double icc_a1(std::span<const double> est, std::span<const double> ref);

AgreementReport agreement_report(std::span<const double> est, std::span<const double> ref,
                                 std::vector<std::string> labels = {});

// Myocardial ring between concentric ellipses with border_fraction of the
// local wall thickness excluded at each boundary, split into n equal angular
// sectors about the center; areas by 4x supersampled rasterization.
std::vector<double> sector_areas(const EllipseShape& endo, const EllipseShape& epi,
                                 int n_sectors = 6, double border_fraction = 0.2,
                                 double pixel_mm = 1.0);

struct MotionAgreement {
  double cardiac_abs_pearson = 0.0;
  double resp_abs_pearson = 0.0;
};

// |Pearson| per channel after affine sign/scale alignment onto the truth.
MotionAgreement motion_agreement(const LatentSignals& latents,
                                 std::span<const double> cardiac_truth,
                                 std::span<const double> resp_truth);

}  // namespace spiralir
