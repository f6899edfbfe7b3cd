#include "lutnn/common.hpp"

#include <algorithm>
#include <cmath>

namespace lutnn {

std::vector<double> midpoint_cuts(const std::vector<double>& levels) {
    std::vector<double> cuts;
    cuts.reserve(levels.size() > 0 ? levels.size() - 1 : 0);
    for (size_t i = 0; i + 1 < levels.size(); ++i)
        cuts.push_back(0.5 * (levels[i] + levels[i + 1]));
    return cuts;
}

int nearest_by_cuts(const std::vector<double>& cuts, double x) {
    auto it = std::upper_bound(cuts.begin(), cuts.end(), x);
    int idx = static_cast<int>(it - cuts.begin());
    // upper_bound already sends a value sitting exactly on a cut to the
    // upper level; that is away-from-zero only for non-negative cuts.
    if (idx > 0 && x == cuts[idx - 1] && cuts[idx - 1] < 0.0) --idx;
    return idx;
}

int nearest_level_index(const std::vector<double>& levels, double x) {
    require(!levels.empty(), "nearest_level_index: empty level list");
    if (levels.size() == 1) return 0;
    return nearest_by_cuts(midpoint_cuts(levels), x);
}

} // namespace lutnn
