#pragma once

#include <stdexcept>
#include <string>

namespace mtcorr {

/// Malformed photon stream or interval record (ordering, gap, corrupt value).
class stream_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid correlator configuration.
class config_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Engine operation attempted in a lifecycle state that does not permit it.
class lifecycle_error : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Snapshot requested before the engine has entered processing.
class no_data_error : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// A 64-bit accumulator or monitor would have wrapped.
class accumulator_overflow : public std::overflow_error {
  public:
    using std::overflow_error::overflow_error;
};

/// Physical parameters outside their valid domain.
class physics_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Fit could not be set up (too few channels, unidentifiable parameters).
class fit_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Text or binary input that does not parse. Carries the offending line
/// number when one applies (0 otherwise).
class parse_error : public std::runtime_error {
    std::size_t line_;

  public:
    explicit parse_error(std::string const &what, std::size_t line = 0)
        : std::runtime_error(line == 0 ? what
                                       : "line " + std::to_string(line) +
                                             ": " + what),
          line_(line) {}

    [[nodiscard]] auto line() const noexcept -> std::size_t { return line_; }
};

} // namespace mtcorr
