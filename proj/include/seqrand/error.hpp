#pragma once

#include <stdexcept>
#include <string>

namespace seqrand {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimMismatch : public Error {
public:
    using Error::Error;
};

class NotHermitian : public Error {
public:
    using Error::Error;
};

class NotInvolution : public Error {
public:
    using Error::Error;
};

class InvalidState : public Error {
public:
    using Error::Error;
};

class InvalidNoise : public Error {
public:
    using Error::Error;
};

class InvalidBehavior : public Error {
public:
    using Error::Error;
};

class RequiresPureState : public Error {
public:
    using Error::Error;
};

class SuperQuantum : public Error {
public:
    using Error::Error;
};

class UnsupportedTarget : public Error {
public:
    using Error::Error;
};

class InvalidProblem : public Error {
public:
    using Error::Error;
};

class SolverFailure : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace seqrand
