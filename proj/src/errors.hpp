// errors.hpp -- exception hierarchy shared across the lab.
#pragma once

#include <stdexcept>
#include <string>

namespace hymlab {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// base geometry
struct DomainError : Error { using Error::Error; };
struct DegenerateHessian : Error { using Error::Error; };
struct StepTooLarge : Error { using Error::Error; };
struct NonpositiveScale : Error { using Error::Error; };

// spectral data / connections
struct NonDistinctPoints : Error { using Error::Error; };
struct NonIntegerShift : Error { using Error::Error; };
struct SectionNotDifferentiable : Error { using Error::Error; };
struct DegenerateSpectralGap : Error { using Error::Error; };

// gauge calculus
struct IllConditioned : Error { using Error::Error; };
struct NotFlat : Error { using Error::Error; };

// flows / gauge fixing
struct OutsideNeighborhood : Error { using Error::Error; };
struct MaxStepsExceeded : Error { using Error::Error; };
struct EnergyIncrease : Error { using Error::Error; };
struct CurvatureTooLarge : Error { using Error::Error; };
struct FlowFailed : Error { using Error::Error; };
struct AlignmentFailed : Error { using Error::Error; };

// configuration / CLI
struct ConfigError : Error { using Error::Error; };

} // namespace hymlab
