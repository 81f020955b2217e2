#pragma once

#include <stdexcept>
#include <string>

namespace specnet {

// Base class for all library errors so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape or padding target incompatible with the operand.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Broken sparse-map structure: out-of-bounds indices, unsorted entries,
// or a gradient support that is not contained in the cached support.
class StructuralError : public Error {
public:
    using Error::Error;
};

// A file does not follow its declared binary layout (bad magic, bad field).
class FormatError : public Error {
public:
    using Error::Error;
};

// A file payload is shorter than its header promises.
class LengthError : public Error {
public:
    using Error::Error;
};

// Two inputs that must agree (e.g. image/label counts) do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// A parsed value is outside its legal range.
class ValueError : public Error {
public:
    using Error::Error;
};

// A numeric guarantee was violated at run time, e.g. a spectral map that
// should be conjugate-symmetric is not within tolerance.
class NumericIntegrityError : public Error {
public:
    using Error::Error;
};

// Bad command line, bad config file, or an API precondition broken by the
// caller (empty ledger, empty sweep list).
class UsageError : public Error {
public:
    using Error::Error;
};

// Requested dataset or checkpoint is missing or unreadable.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace specnet
