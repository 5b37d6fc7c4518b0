#include "sfmap/metrics.hpp"

namespace sfmap {

double matching_percentage(const MaterialMap& map) {
    long long matches = 0, roi = 0;
    for (const MaterialMapSample& s : map.samples) {
        if (!s.in_roi) continue;
        ++roi;
        if (s.predicted == s.truth) ++matches;
    }
    if (roi == 0)
        throw ContractError("matching_percentage: no region-of-interest samples");
    return 100.0 * double(matches) / double(roi);
}

std::array<std::optional<ClassAccuracy>, 4> per_class_accuracy(const MaterialMap& map) {
    std::array<long long, 4> support{}, correct{};
    for (const MaterialMapSample& s : map.samples) {
        if (!s.in_roi) continue;
        if (s.truth < 0 || s.truth >= kNumClasses)
            throw IndexError("per_class_accuracy: truth class outside [0, 4)");
        ++support[size_t(s.truth)];
        if (s.predicted == s.truth) ++correct[size_t(s.truth)];
    }
    std::array<std::optional<ClassAccuracy>, 4> out;
    for (int c = 0; c < 4; ++c)
        if (support[size_t(c)] > 0)
            out[size_t(c)] = ClassAccuracy{
                100.0 * double(correct[size_t(c)]) / double(support[size_t(c)]),
                int(support[size_t(c)])};
    return out;
}

}  // namespace sfmap
