#ifndef DEFCAST_ERRORS_HPP_
#define DEFCAST_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace defcast {

/// Input outside an operation's domain (decision not in Γ, forecast outside
/// the choice-function domain, malformed configuration, ...).
class rejected_input : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A protocol step called out of order.
class usage_error : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Numerical breakdown that should be unreachable for well-formed games and
/// kernels (root finder exhausted its bracket cascade, non-PSD kernel).
class internal_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text input that failed to parse. Carries the 1-based line number.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace defcast

#endif // DEFCAST_ERRORS_HPP_
