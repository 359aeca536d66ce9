#pragma once

#include <stdexcept>
#include <string>

namespace sadga {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

#define SADGA_DEFINE_ERROR(Name)          \
    class Name : public Error {           \
       public:                            \
        using Error::Error;               \
    };

SADGA_DEFINE_ERROR(InvalidShapeError)
SADGA_DEFINE_ERROR(ContractError)
SADGA_DEFINE_ERROR(DegenerateSliceError)
SADGA_DEFINE_ERROR(NondeterminismError)
SADGA_DEFINE_ERROR(ValidationError)
SADGA_DEFINE_ERROR(ParseError)
SADGA_DEFINE_ERROR(ResolutionError)
SADGA_DEFINE_ERROR(ReferenceError)
SADGA_DEFINE_ERROR(CompileError)
SADGA_DEFINE_ERROR(DataError)
SADGA_DEFINE_ERROR(ArgumentError)
SADGA_DEFINE_ERROR(DivergenceError)

#undef SADGA_DEFINE_ERROR

}  // namespace sadga
