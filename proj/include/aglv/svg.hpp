#pragma once
#include <string>
#include <vector>

#include "aglv/matrix.hpp"

namespace aglv {

// Static SVG output with fixed float formatting so identical inputs produce
// byte-identical files.

// Scatter of the first two latent dimensions, one marker per row, colored by
// label when given (otherwise by row order along the curve).
std::string latent_scatter_svg(const DenseMatrix& x, const std::vector<int>* labels);

// Histogram of one latent dimension.
std::string latent_histogram_svg(const DenseMatrix& x, std::size_t dim, std::size_t bins = 30);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace aglv
