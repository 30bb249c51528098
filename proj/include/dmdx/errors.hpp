#pragma once
#include <stdexcept>
#include <string>

namespace dmdx {

// bad config values, caught at load or construction time
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// argument outside its allowed range
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// grids that should be co-sampled but are not
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// overlay / stacking rules for secondary holograms
struct RuleViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// no room left in FP1 for another window
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// measurement could not produce a result (no beam, no peak ...)
struct MeasurementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dmdx
