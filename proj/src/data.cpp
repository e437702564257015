#include "aglv/data.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "aglv/linalg.hpp"
#include "aglv/rng.hpp"

namespace aglv {

namespace {
constexpr double kPi = 3.1415926535897932384626433832795;
}

Dataset make_s_curve_dataset(std::size_t n, std::size_t m, const BaseKernelConfig& kernel_cfg,
                             double noise_var, std::uint64_t seed) {
  if (n < 2) throw Error("make_s_curve_dataset: need at least two observations");
  kernel_cfg.validate();
  if (!(noise_var >= 0.0)) throw Error("make_s_curve_dataset: negative noise variance");

  Rng rng(seed);
  DenseMatrix x(n, 2);
  const double t0 = -1.5 * kPi;
  const double dt = 3.0 * kPi / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + dt * static_cast<double>(i);
    const double sgn = t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0);
    x(i, 0) = std::sin(t);
    x(i, 1) = sgn * (std::cos(t) - 1.0);
  }
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += 0.01 * rng.normal();

  DenseMatrix cov = kernel_matrix(x, make_base_kernel_fn(kernel_cfg));
  for (std::size_t i = 0; i < n; ++i) cov(i, i) += noise_var;

  CholeskyFactor chol;
  try {
    chol = CholeskyFactor(cov);
  } catch (const NotPositiveDefinite&) {
    for (std::size_t i = 0; i < n; ++i) cov(i, i) += 1e-8;
    try {
      chol = CholeskyFactor(cov);
    } catch (const NotPositiveDefinite&) {
      throw KernelNotPD("make_s_curve_dataset: kernel matrix not positive definite");
    }
  }

  // draw all standard normals first, then color column by column
  DenseMatrix z(n, m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < n; ++i) z(i, j) = rng.normal();

  Dataset ds;
  ds.y = DenseMatrix(n, m);
  const DenseMatrix& l = chol.lower();
  const std::ptrdiff_t mm = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < mm; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * z(k, static_cast<std::size_t>(j));
      ds.y(i, static_cast<std::size_t>(j)) = s;
    }
  }

  ds.x_true = x;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i)
    labels[i] = static_cast<int>(std::min<std::size_t>(3, 4 * i / n));
  ds.labels = std::move(labels);
  return ds;
}

Dataset apply_missing_mask(Dataset ds, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw Error("apply_missing_mask: fraction must be in [0, 1)");
  const std::size_t n = ds.y.rows();
  const std::size_t m = ds.y.cols();
  MaskMatrix mask(n, m, true);
  const std::size_t hide = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n * m)));

  Rng rng(seed);
  if (hide > 0) {
    // exact-count sample without replacement (partial Fisher-Yates)
    std::vector<std::size_t> idx(n * m);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < hide; ++i) {
      const std::size_t j = i + rng.uniform_below(idx.size() - i);
      std::swap(idx[i], idx[j]);
      mask.set(idx[i] / m, idx[i] % m, false);
    }
  }
  // every column keeps at least one observed entry
  for (std::size_t j = 0; j < m; ++j) {
    if (mask.observed_rows_of_col(j).empty()) {
      const std::size_t r = rng.uniform_below(n);
      mask.set(r, j, true);
    }
  }
  ds.mask = std::move(mask);
  return ds;
}

namespace {

bool parse_field(const std::string& field, double& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || errno == ERANGE) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0';
}

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("csv: cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    rows.push_back(split_csv_line(std::move(line)));
    line.clear();
  }
  return rows;
}

bool row_all_numeric(const std::vector<std::string>& row) {
  double v;
  for (const auto& f : row)
    if (!parse_field(f, v)) return false;
  return true;
}

}  // namespace

DenseMatrix load_matrix_csv(const std::string& path) {
  auto rows = read_csv_rows(path);
  if (rows.empty()) throw Error("csv: " + path + " is empty");
  std::size_t first = 0;
  if (!row_all_numeric(rows[0])) first = 1;  // header row
  if (first >= rows.size()) throw Error("csv: " + path + " has a header but no data");

  const std::size_t cols = rows[first].size();
  DenseMatrix out(rows.size() - first, cols);
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != cols)
      throw RaggedRows("csv: row " + std::to_string(r) + " of " + path + " has " +
                       std::to_string(rows[r].size()) + " fields, expected " +
                       std::to_string(cols));
    for (std::size_t c = 0; c < cols; ++c) {
      double v;
      if (!parse_field(rows[r][c], v))
        throw NonNumericField("csv: non-numeric field at row " + std::to_string(r) + " col " +
                              std::to_string(c) + " of " + path);
      out(r - first, c) = v;
    }
  }
  return out;
}

void save_matrix_csv(const std::string& path, const DenseMatrix& m,
                     const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("csv: cannot open " + path + " for writing");
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  char buf[64];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("csv: write failure on " + path);
}

LabeledMatrix load_labels_csv(const std::string& path) {
  const DenseMatrix all = load_matrix_csv(path);
  if (all.cols() < 2) throw Error("labels-csv: need at least one feature column plus labels");
  LabeledMatrix out;
  out.features = DenseMatrix(all.rows(), all.cols() - 1);
  out.labels.resize(all.rows());
  for (std::size_t r = 0; r < all.rows(); ++r) {
    for (std::size_t c = 0; c + 1 < all.cols(); ++c) out.features(r, c) = all(r, c);
    const double lv = all(r, all.cols() - 1);
    const int li = static_cast<int>(std::llround(lv));
    if (std::fabs(lv - static_cast<double>(li)) > 1e-9)
      throw NonNumericField("labels-csv: non-integer label at row " + std::to_string(r));
    out.labels[r] = li;
  }
  return out;
}

void save_labels_csv(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("csv: cannot open " + path + " for writing");
  out << "label\n";
  for (int v : labels) out << v << '\n';
}

std::vector<int> load_label_column_csv(const std::string& path) {
  const DenseMatrix m = load_matrix_csv(path);
  if (m.cols() != 1) throw Error("labels: expected a single column in " + path);
  std::vector<int> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double lv = m(r, 0);
    out[r] = static_cast<int>(std::llround(lv));
    if (std::fabs(lv - static_cast<double>(out[r])) > 1e-9)
      throw NonNumericField("labels: non-integer label at row " + std::to_string(r));
  }
  return out;
}

MaskMatrix load_mask_csv(const std::string& path) {
  const DenseMatrix m = load_matrix_csv(path);
  MaskMatrix mask(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) mask.set(r, c, m(r, c) != 0.0);
  return mask;
}

void save_mask_csv(const std::string& path, const MaskMatrix& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("csv: cannot open " + path + " for writing");
  for (std::size_t r = 0; r < mask.rows(); ++r) {
    for (std::size_t c = 0; c < mask.cols(); ++c)
      out << (c ? "," : "") << (mask.observed(r, c) ? 1 : 0);
    out << '\n';
  }
}

}  // namespace aglv
