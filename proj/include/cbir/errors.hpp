#pragma once

#include <stdexcept>
#include <string>

namespace cbir {

// Every failure raised by the library derives from Error, so callers that do
// not care about the specific kind can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CBIR_DEFINE_ERROR(Name)                  \
    class Name : public Error {                  \
    public:                                      \
        using Error::Error;                      \
    }

CBIR_DEFINE_ERROR(InvalidArgument);
CBIR_DEFINE_ERROR(DecodeError);
CBIR_DEFINE_ERROR(OutOfBounds);
CBIR_DEFINE_ERROR(EmptyCooccurrence);
CBIR_DEFINE_ERROR(ImageTooSmall);
CBIR_DEFINE_ERROR(DuplicateId);
CBIR_DEFINE_ERROR(IoError);
CBIR_DEFINE_ERROR(FormatError);
CBIR_DEFINE_ERROR(DimMismatch);
CBIR_DEFINE_ERROR(TechniqueMismatch);
CBIR_DEFINE_ERROR(UnknownTechnique);
CBIR_DEFINE_ERROR(InvalidCounts);
CBIR_DEFINE_ERROR(EmptyInput);

#undef CBIR_DEFINE_ERROR

}  // namespace cbir
