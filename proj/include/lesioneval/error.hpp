#pragma once

#include <stdexcept>
#include <string>

namespace lesioneval {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file content or header.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& what) : Error("format error: " + what) {}
};

/// Well-formed input using a feature this library does not read.
class UnsupportedError : public Error {
public:
    explicit UnsupportedError(const std::string& what) : Error("unsupported: " + what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("i/o error: " + what) {}
};

/// Two volumes that must share a grid do not.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error("shape error: " + what) {}
};

/// A value violates a domain invariant (e.g. probability outside [0,1]).
class ValueError : public Error {
public:
    explicit ValueError(const std::string& what) : Error("value error: " + what) {}
};

class StatsError : public Error {
public:
    explicit StatsError(const std::string& what) : Error("stats error: " + what) {}
};

/// Invalid phantom scenario description.
class SpecError : public Error {
public:
    explicit SpecError(const std::string& what) : Error("scenario error: " + what) {}
};

}  // namespace lesioneval
