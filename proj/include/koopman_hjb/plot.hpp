#pragma once

#include <string>
#include <vector>

#include "koopman_hjb/pipeline.hpp"

namespace koopman_hjb {

/// Semilog scatter of σ_i against i, one circle per value.
std::string render_decay_svg(const std::vector<double>& sigmas);

/// Heatmap of v over a 2-d value grid (x1, x2, v, ...), or a line plot in 1-d.
std::string render_value_svg(const CsvTable& value_grid);

}  // namespace koopman_hjb
