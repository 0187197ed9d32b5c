#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kanmerge {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable argument values.
class InputError : public Error {
public:
    using Error::Error;
};

/// Vector or table shapes that do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Models that cannot be averaged because their structure differs.
class MergeError : public Error {
public:
    using Error::Error;
};

/// Malformed dataset or model files. `line()` is 0 when not line-oriented.
class DataError : public Error {
public:
    DataError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Training produced non-finite parameters.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t round)
        : Error(what), round_(round) {}

    std::size_t round() const noexcept { return round_; }

private:
    std::size_t round_;
};

/// Pearson correlation of a constant vector.
class UndefinedCorrelation : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require_dim(std::size_t got, std::size_t want, const char* what) {
    if (got != want)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(want) +
                             ", got " + std::to_string(got));
}

} // namespace detail
} // namespace kanmerge
