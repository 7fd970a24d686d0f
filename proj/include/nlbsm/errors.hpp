#pragma once

#include <stdexcept>
#include <string>

namespace nlbsm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidState : public Error {
public:
    using Error::Error;
};

class InvalidDensityMatrix : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class DegenerateData : public Error {
public:
    using Error::Error;
};

} // namespace nlbsm
