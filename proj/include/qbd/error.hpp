#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qbd {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file or directory could not be read.
class IngestionError : public Error {
public:
    IngestionError(std::string path, const std::string& what)
        : Error("cannot read '" + path + "': " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Input parsed but violates a cross-reference or domain constraint.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::vector<std::string> offenders = {})
        : Error(compose(what, offenders)), offenders_(std::move(offenders)) {}

    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    static std::string compose(const std::string& what, const std::vector<std::string>& items) {
        if (items.empty()) return what;
        std::string out = what + ":";
        for (const auto& s : items) out += " " + s;
        return out;
    }

    std::vector<std::string> offenders_;
};

/// The external embedding service failed, timed out, or replied out of protocol.
class TransportError : public Error {
public:
    using Error::Error;
};

/// A precomputed embedding was requested for a text that has none.
class LookupError : public Error {
public:
    using Error::Error;
};

/// A configuration value is outside its domain. `field()` is the dotted key path.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace qbd
