#ifndef ADVSEL_ERRORS_HPP
#define ADVSEL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace advsel {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or dimension mismatch between tensors, models or batches.
class dimension_error : public error {
public:
    using error::error;
};

/// Invalid argument value (label out of range, bad fraction, empty grid, ...).
class value_error : public error {
public:
    using error::error;
};

/// A selection mask with no selected samples cannot produce an update.
class empty_selection_error : public error {
public:
    using error::error;
};

/// File open / read / write failure.
class io_error : public error {
public:
    using error::error;
};

/// Malformed IDX container. The kind distinguishes the failure modes the
/// parser can report.
class idx_error : public io_error {
public:
    enum class kind { wrong_magic, truncated, count_mismatch };

    idx_error(kind k, const std::string& what) : io_error(what), kind_(k) {}
    kind which() const noexcept { return kind_; }

private:
    kind kind_;
};

/// Invalid run configuration (maps to CLI exit code 2).
class config_error : public error {
public:
    using error::error;
};

} // namespace advsel

#endif
