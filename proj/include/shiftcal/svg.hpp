#pragma once

#include <string>
#include <vector>

#include "shiftcal/metrics.hpp"

namespace shiftcal {

// Two-panel reliability diagram: accuracy-vs-confidence bars with the
// diagonal reference on the left, per-bin mass bars on the right. One rect per
// nonempty bin per panel.
std::string reliability_svg(const EceReport& report);

// Box-style spread chart for the top-ranked importance-weight estimates:
// a min-max whisker and a median tick per example.
std::string iw_box_svg(const std::vector<IwExampleStat>& stats);

}  // namespace shiftcal
