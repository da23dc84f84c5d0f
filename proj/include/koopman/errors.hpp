#pragma once

#include <stdexcept>
#include <string>

namespace koopman {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor / linear algebra
struct ShapeMismatch : Error { using Error::Error; };
struct RankTooLarge : Error { using Error::Error; };
struct ConvergenceFailure : Error { using Error::Error; };
struct DefectiveMatrix : Error { using Error::Error; };

// Autodiff
struct NonScalarLoss : Error { using Error::Error; };
struct DegenerateSpectrum : Error { using Error::Error; };

// Nets
struct SpecMismatch : Error { using Error::Error; };

// Metrics
struct AllReferenceZero : Error { using Error::Error; };

// Data
struct DegenerateIndexes : Error { using Error::Error; };
struct NoIndexMap : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct NonFiniteValue : Error { using Error::Error; };
struct RaggedTrajectories : Error { using Error::Error; };

// Models
struct NotTrained : Error { using Error::Error; };
struct NoTestSplit : Error { using Error::Error; };
struct InvalidParams : Error { using Error::Error; };

// Hyperparameter search
struct UnknownHyperparameter : Error { using Error::Error; };
struct UnknownSortKey : Error { using Error::Error; };

// Config / checkpoint files
struct ConfigError : Error { using Error::Error; };

namespace log {

enum class Level { Quiet = 0, Normal = 1, Verbose = 2 };

Level& level();

/// Non-fatal diagnostics (ImaginaryResidual, ZeroEigenvalueExactMode, ...).
void warn(const std::string& msg);
void info(const std::string& msg);

} // namespace log

} // namespace koopman
