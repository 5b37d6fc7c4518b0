#pragma once

#include <array>
#include <optional>
#include <vector>

#include "sfmap/common.hpp"

namespace sfmap {

struct MaterialMapSample {
    Vec3 point;
    int predicted = 0;
    int truth = 0;
    bool in_roi = true;
};

struct MaterialMap {
    std::vector<MaterialMapSample> samples;
};

/// 100 * matches / roi_count over region-of-interest samples, integer counts
/// before the final division. Throws ContractError when the ROI is empty.
double matching_percentage(const MaterialMap& map);

struct ClassAccuracy {
    double percent = 0.0;
    int support = 0;
};

/// Accuracy per true class over ROI samples; classes without support are
/// reported absent rather than 0.
std::array<std::optional<ClassAccuracy>, 4> per_class_accuracy(const MaterialMap& map);

}  // namespace sfmap
