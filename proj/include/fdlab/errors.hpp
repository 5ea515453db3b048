#pragma once

#include <stdexcept>
#include <string>

namespace fdlab {

// Base class for everything thrown by this library. Catch this to map any
// failure onto a CLI exit code without enumerating the subtypes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input shape/dimension problems.
struct DimensionMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct DimOrderViolation : Error { using Error::Error; };
struct DimConstraintViolated : Error { using Error::Error; };

// Degenerate linear-algebra inputs.
struct RankDeficient : Error { using Error::Error; };
struct NotOrthonormal : Error { using Error::Error; };
struct FullAmbient : Error { using Error::Error; };
struct AlreadyContained : Error { using Error::Error; };
struct SingularNormalEquations : Error { using Error::Error; };
struct NotPositiveDefinite : Error { using Error::Error; };

// Construction / verification failures.
struct TargetUnreachable : Error { using Error::Error; };
struct PreconditionViolated : Error { using Error::Error; };
struct HypothesisViolated : Error { using Error::Error; };

// Runtime numerical failure: a non-finite value appeared where it must not.
struct NumericalBlowup : Error { using Error::Error; };

// Configuration file / CLI argument problems.
struct ConfigError : Error { using Error::Error; };

}  // namespace fdlab
