#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace plam {

// Base for all library errors so callers can catch plam failures as a group.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define PLAM_ERROR_TYPE(Name)                                        \
    struct Name : Error {                                            \
        explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
    }

PLAM_ERROR_TYPE(TooFewDistinctValues);
PLAM_ERROR_TYPE(SingularSystem);
PLAM_ERROR_TYPE(NoConvergence);
PLAM_ERROR_TYPE(EmptyModel);
PLAM_ERROR_TYPE(SchemaMismatch);
PLAM_ERROR_TYPE(UnknownVariable);
PLAM_ERROR_TYPE(ConcurvityViolation);
PLAM_ERROR_TYPE(LengthMismatch);
PLAM_ERROR_TYPE(SingleClass);
PLAM_ERROR_TYPE(EmptyRelevant);
PLAM_ERROR_TYPE(SingularGram);
PLAM_ERROR_TYPE(MissingTarget);
PLAM_ERROR_TYPE(NonNumericCell);
PLAM_ERROR_TYPE(EmptyFile);

#undef PLAM_ERROR_TYPE

// Non-fatal events (dropped columns, demoted variables, pinned coefficients).
struct Warning {
    std::string code;
    std::string detail;
};

using Warnings = std::vector<Warning>;

}  // namespace plam
