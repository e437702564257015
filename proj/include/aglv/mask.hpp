#pragma once
#include <cstdint>
#include <vector>

namespace aglv {

// Boolean observation mask for an N x M data matrix; true = observed.
class MaskMatrix {
 public:
  MaskMatrix() = default;
  MaskMatrix(std::size_t rows, std::size_t cols, bool observed = true)
      : rows_(rows), cols_(cols), obs_(rows * cols, observed ? 1 : 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool observed(std::size_t r, std::size_t c) const { return obs_[r * cols_ + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { obs_[r * cols_ + c] = v ? 1 : 0; }

  std::size_t count_hidden() const {
    std::size_t k = 0;
    for (auto v : obs_) k += (v == 0);
    return k;
  }

  bool all_observed() const { return count_hidden() == 0; }

  std::vector<std::size_t> observed_rows_of_col(std::size_t c) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < rows_; ++r)
      if (observed(r, c)) out.push_back(r);
    return out;
  }

  std::vector<std::size_t> hidden_rows_of_col(std::size_t c) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < rows_; ++r)
      if (!observed(r, c)) out.push_back(r);
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> obs_;
};

}  // namespace aglv
