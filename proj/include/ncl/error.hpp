#ifndef NCL_ERROR_HPP
#define NCL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ncl {

/// Input whose shape or content is incompatible with the operation.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration value out of its legal range.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A non-finite value appeared in a loss or gradient.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, long epoch = -1, long batch = -1, long sample = -1,
                     long layer = -1)
        : std::runtime_error(what), epoch_(epoch), batch_(batch), sample_(sample), layer_(layer) {}

    long epoch() const noexcept { return epoch_; }
    long batch() const noexcept { return batch_; }
    long sample() const noexcept { return sample_; }
    long layer() const noexcept { return layer_; }

private:
    long epoch_;
    long batch_;
    long sample_;
    long layer_;
};

/// Malformed or truncated file, or an I/O failure. Message carries the path.
class FileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text parse failure with a 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace ncl

#endif  // NCL_ERROR_HPP
