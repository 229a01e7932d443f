#pragma once

#include <stdexcept>
#include <string>

namespace dlps {

// Broken simulator invariant: scheduling in the past, impossible state.
class FatalError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

// A command was issued that the DRAM state machine or its timing forbids.
class ProtocolViolation : public FatalError
{
  public:
    using FatalError::FatalError;
};

// State history or energy bookkeeping is inconsistent.
class AccountingError : public FatalError
{
  public:
    using FatalError::FatalError;
};

// Bad user-supplied configuration value.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// Malformed or unreadable input file (traces).
class InputError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

} // namespace dlps
