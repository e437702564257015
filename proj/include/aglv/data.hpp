#pragma once
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aglv/kernels.hpp"
#include "aglv/mask.hpp"
#include "aglv/matrix.hpp"

namespace aglv {

struct Dataset {
  DenseMatrix y;                          // N x M observations
  std::optional<DenseMatrix> x_true;      // N x Q ground-truth latents
  std::optional<std::vector<int>> labels; // N integer labels
  std::optional<MaskMatrix> mask;         // true = observed
};

// Synthetic data from a planar S-shaped latent curve: latents
// (sin t, sign(t)(cos t - 1)) on an equispaced grid over [-3pi/2, 3pi/2] with
// small Gaussian jitter; observation columns drawn i.i.d. from
// N(0, K + noise_var I) with K built by the configured kernel over the
// latents. Labels bin the curve position into quartiles.
Dataset make_s_curve_dataset(std::size_t n, std::size_t m, const BaseKernelConfig& kernel_cfg,
                             double noise_var, std::uint64_t seed);

// Hide a fraction of entries uniformly at random (exact count), keeping at
// least one observed entry per column. Hidden values stay in y; the mask only
// gates the training likelihood.
Dataset apply_missing_mask(Dataset ds, double fraction, std::uint64_t seed);

// Rectangular CSV with an optional auto-detected header row. Values are
// written with round-trip-exact formatting.
DenseMatrix load_matrix_csv(const std::string& path);
void save_matrix_csv(const std::string& path, const DenseMatrix& m,
                     const std::vector<std::string>& header = {});

// CSV whose last column is an integer label.
struct LabeledMatrix {
  DenseMatrix features;
  std::vector<int> labels;
};
LabeledMatrix load_labels_csv(const std::string& path);

void save_labels_csv(const std::string& path, const std::vector<int>& labels);
std::vector<int> load_label_column_csv(const std::string& path);

// 0/1 mask CSV (1 = observed).
MaskMatrix load_mask_csv(const std::string& path);
void save_mask_csv(const std::string& path, const MaskMatrix& mask);

}  // namespace aglv
