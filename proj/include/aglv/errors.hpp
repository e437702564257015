#pragma once
#include <stdexcept>
#include <string>

namespace aglv {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// linear algebra
struct NotPositiveDefinite : Error { using Error::Error; };
struct SymmetryViolation : Error { using Error::Error; };
struct NoConvergence : Error { using Error::Error; };
struct NonPositiveSigma : Error { using Error::Error; };

// autodiff
struct ShapeMismatch : Error { using Error::Error; };
struct UnsupportedPrimitive : Error { using Error::Error; };
struct NonScalarOutput : Error { using Error::Error; };

// kernels
struct DimensionMismatch : Error { using Error::Error; };
struct OddL : Error { using Error::Error; };
struct NonPositiveEpsilon : Error { using Error::Error; };

// model / training
struct EmptyColumn : Error { using Error::Error; };
struct NonFiniteInput : Error { using Error::Error; };
struct NonFiniteObjective : Error { using Error::Error; };

// collapse diagnostics
struct InvalidQprime : Error { using Error::Error; };
struct NegativeUnderRoot : Error { using Error::Error; };
struct NonOrthogonalR : Error { using Error::Error; };

// data
struct KernelNotPD : Error { using Error::Error; };
struct RaggedRows : Error { using Error::Error; };
struct NonNumericField : Error { using Error::Error; };

// evaluation
struct TooFewPoints : Error { using Error::Error; };
struct RankDeficientDesign : Error { using Error::Error; };
struct NoHiddenEntries : Error { using Error::Error; };

}  // namespace aglv
