#pragma once

#include <stdexcept>
#include <string>

namespace kamwb {

/// Base class of all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    /// Short machine-readable name, e.g. "ZeroDivisor".
    virtual const char* kind() const noexcept { return "Error"; }
    /// True for failures of a numerical gate or bound (CLI exit code 3).
    virtual bool is_gate() const noexcept { return false; }
};

#define KAMWB_ERROR(Name, Gate)                                                    \
    class Name : public Error {                                                    \
    public:                                                                        \
        explicit Name(const std::string& what) : Error(std::string(#Name ": ") + what) {} \
        const char* kind() const noexcept override { return #Name; }               \
        bool is_gate() const noexcept override { return Gate; }                    \
    };

// lattice
KAMWB_ERROR(NoCoveringSet, false)
KAMWB_ERROR(CapTooLarge, false)
// approx
KAMWB_ERROR(NoConvergence, false)
KAMWB_ERROR(Divergence, false)
// apseries
KAMWB_ERROR(DomainViolation, false)
KAMWB_ERROR(SupportOverflow, false)
// resonance
KAMWB_ERROR(Violation, true)
// kam
KAMWB_ERROR(BoundViolated, true)
KAMWB_ERROR(ZeroDivisor, true)
KAMWB_ERROR(SmallnessViolated, true)
KAMWB_ERROR(FlowEscape, true)
KAMWB_ERROR(NewtonDiverged, true)
KAMWB_ERROR(ErrorBoundExceeded, true)
KAMWB_ERROR(GateFailed, true)
KAMWB_ERROR(DegenerateJacobian, false)
// oscillator
KAMWB_ERROR(QuadratureStall, false)
KAMWB_ERROR(PropertyViolation, true)
KAMWB_ERROR(OriginExcluded, false)
KAMWB_ERROR(StepRejected, false)
// configuration
KAMWB_ERROR(ConfigError, false)

#undef KAMWB_ERROR

} // namespace kamwb
