#pragma once

#include <optional>
#include <string>

#include "ceg/nets.hpp"

namespace ceg {

struct LoadedModel {
    CegModel model;
    std::optional<CvaeNets> cvae;
};

// Single JSON document: architecture metadata, standardization stats, and
// every parameter array (name, shape, row-major values at 17 significant
// digits). Round-trips value-exactly.
void save_model(const CegModel& model, const std::optional<CvaeNets>& cvae,
                const std::string& path);
LoadedModel load_model(const std::string& path);

} // namespace ceg
