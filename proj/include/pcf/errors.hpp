#pragma once

#include <stdexcept>
#include <string>

namespace pcf {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed descriptor or function document.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// H is not a discrete Laplacian (symmetry, sign or kernel check failed).
class InvalidLaplacian : public Error {
public:
    using Error::Error;
};

class DisconnectedGluing : public Error {
public:
    using Error::Error;
};

/// A build would exceed the configured cell or vertex budget.
class LevelTooLarge : public Error {
public:
    using Error::Error;
};

/// The one-step trace of the level-1 energy does not reproduce E_0.
class HarmonicStructureViolation : public Error {
public:
    using Error::Error;
};

class SingularInterior : public Error {
public:
    using Error::Error;
};

class SolverFailure : public Error {
public:
    using Error::Error;
};

class EigSolverFailure : public SolverFailure {
public:
    using SolverFailure::SolverFailure;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class FixedPointDivergence : public Error {
public:
    using Error::Error;
};

class DegenerateHarmonicSpace : public Error {
public:
    using Error::Error;
};

} // namespace pcf
