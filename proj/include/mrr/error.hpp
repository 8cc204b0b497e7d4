#pragma once

#include <stdexcept>
#include <string>

namespace mrr {

// Base for every error raised by the toolkit.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: files, configs, argument ranges. CLI exit code 1.
class InputError : public Error
{
public:
    using Error::Error;
};

// The data parsed fine but the model cannot describe it (no signal, validity
// window violated, unidentifiable parameters). CLI exit code 2.
class ModelError : public Error
{
public:
    using Error::Error;
};

class NoResonanceError : public ModelError
{
public:
    using ModelError::ModelError;
};

class AmbiguousResonanceError : public ModelError
{
public:
    using ModelError::ModelError;
};

} // namespace mrr
