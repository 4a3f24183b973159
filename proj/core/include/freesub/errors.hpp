#pragma once

#include <stdexcept>
#include <string>

namespace freesub {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    /// Short machine-readable tag used in structured error output.
    [[nodiscard]] virtual const char* kind() const noexcept { return "Error"; }
};

#define FREESUB_DEFINE_ERROR(Name)                                               \
    class Name : public Error {                                                  \
    public:                                                                      \
        using Error::Error;                                                      \
        [[nodiscard]] const char* kind() const noexcept override { return #Name; } \
    }

FREESUB_DEFINE_ERROR(DomainError);
FREESUB_DEFINE_ERROR(RangeError);
FREESUB_DEFINE_ERROR(DivisionByZero);
FREESUB_DEFINE_ERROR(EvaluationError);
FREESUB_DEFINE_ERROR(ComponentOverflow);
FREESUB_DEFINE_ERROR(NotAnOutlier);
FREESUB_DEFINE_ERROR(GapError);
FREESUB_DEFINE_ERROR(ShapeError);
FREESUB_DEFINE_ERROR(NotHermitian);
FREESUB_DEFINE_ERROR(IndexError);
FREESUB_DEFINE_ERROR(PreconditionError);

#undef FREESUB_DEFINE_ERROR

/// Raised when a fixed-point solve fails; carries the last residual.
class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}
    [[nodiscard]] const char* kind() const noexcept override { return "NoConvergence"; }
    [[nodiscard]] double residual() const noexcept { return residual_; }
    [[nodiscard]] int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

}  // namespace freesub
