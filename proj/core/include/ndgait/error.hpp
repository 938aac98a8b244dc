// Copyright (c) 2026, ndgait authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ndg {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class DomainError : public Error { public: using Error::Error; };
class ContractError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };
class InputError : public Error { public: using Error::Error; };
class DegenerateBatchError : public Error { public: using Error::Error; };
class DegenerateMaskError : public Error { public: using Error::Error; };
class UndefinedMetricError : public Error { public: using Error::Error; };

class FormatError : public Error { public: using Error::Error; };
class MagicError : public FormatError { public: using FormatError::FormatError; };
class TruncatedError : public FormatError { public: using FormatError::FormatError; };
class MetadataMismatchError : public FormatError { public: using FormatError::FormatError; };

// gait event detection
class NoEventsError : public Error { public: using Error::Error; };
class InsufficientCyclesError : public Error { public: using Error::Error; };

} // namespace ndg
