#pragma once

#include <stdexcept>
#include <string>

namespace moyalks {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error("config: " + m) {}
};

// grid observable whose spectrum is not resolved (too much energy in the top band)
struct ResolutionError : std::runtime_error {
    explicit ResolutionError(const std::string& m) : std::runtime_error("resolution: " + m) {}
};

// integrator step rejected by the growth bound
struct StabilityError : std::runtime_error {
    explicit StabilityError(const std::string& m) : std::runtime_error("stability: " + m) {}
};

// sample budget too small for the requested itinerary depth
struct StatisticsError : std::runtime_error {
    explicit StatisticsError(const std::string& m) : std::runtime_error("statistics: " + m) {}
};

// classical-limit fit called on an exactly classical pair (deviation below noise)
struct DegenerateFitError : std::runtime_error {
    explicit DegenerateFitError(const std::string& m) : std::runtime_error("degenerate fit: " + m) {}
};

}  // namespace moyalks
