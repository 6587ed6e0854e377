#ifndef MOC_ERROR_HPP
#define MOC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace moc {

// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class SchemaMismatch : public Error {
public:
    using Error::Error;
};

class MissingValue : public Error {
public:
    using Error::Error;
};

class ConfigInvalid : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

class DatasetTooSmall : public Error {
public:
    using Error::Error;
};

class EmptyComparisonSet : public Error {
public:
    using Error::Error;
};

class NoFeasiblePoint : public Error {
public:
    using Error::Error;
};

// Raised by model adapters: child exited nonzero, produced garbage, or the
// prediction count did not match the batch.
class ExternalProcessFailure : public Error {
public:
    using Error::Error;
};

class BindFailure : public Error {
public:
    using Error::Error;
};

} // namespace moc

#endif
