#pragma once

#include <stdexcept>
#include <string>

namespace sqdunwrap {

/// Bad argument or malformed input supplied by the caller.
class InvalidInput : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Two operands whose dimensions must agree do not.
class DimensionMismatch : public InvalidInput {
  public:
    using InvalidInput::InvalidInput;
};

/// SNR is undefined for an image without fluctuation power.
class DegenerateSignal : public InvalidInput {
  public:
    using InvalidInput::InvalidInput;
};

/// Configuration that cannot be run (bad flags, incompatible checkpoint, ...).
class ConfigError : public InvalidInput {
  public:
    using InvalidInput::InvalidInput;
};

/// On-disk data is missing, truncated, or inconsistent.
class CorruptDataset : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class VersionMismatch : public CorruptDataset {
  public:
    using CorruptDataset::CorruptDataset;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace sqdunwrap
