#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cosim {

/// Base class for every error raised by the framework.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// linalg
class SingularMatrix : public Error {
public:
    explicit SingularMatrix(const std::string& what) : Error(what) {}
};
class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

// dae
class SingularAlgebraicPart : public Error {
public:
    explicit SingularAlgebraicPart(const std::string& what) : Error(what) {}
};
class MixedRow : public Error {
public:
    MixedRow(const std::string& what, std::size_t row) : Error(what), row(row) {}
    std::size_t row;
};
class SingularMass : public Error {
public:
    explicit SingularMass(const std::string& what) : Error(what) {}
};

// integrate
class NewtonDiverged : public Error {
public:
    NewtonDiverged(const std::string& what, std::vector<double> last_iterate,
                   double residual_norm, int iterations)
        : Error(what),
          last_iterate(std::move(last_iterate)),
          residual_norm(residual_norm),
          iterations(iterations) {}
    std::vector<double> last_iterate;
    double residual_norm;
    int iterations;
};
class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& what) : Error(what) {}
};

// coupler
class WiringError : public Error {
public:
    explicit WiringError(const std::string& what) : Error(what) {}
};
class CycleDetected : public Error {
public:
    explicit CycleDetected(const std::string& what) : Error(what) {}
};
class IterationDiverged : public Error {
public:
    IterationDiverged(const std::string& what, double contraction_estimate,
                      std::vector<double> dz_history)
        : Error(what),
          contraction_estimate(contraction_estimate),
          dz_history(std::move(dz_history)) {}
    double contraction_estimate;
    std::vector<double> dz_history;  // per-sweep algebraic splitting errors
};

// models
class PicardDiverged : public Error {
public:
    PicardDiverged(const std::string& what, std::vector<double> residual_trace)
        : Error(what), residual_trace(std::move(residual_trace)) {}
    std::vector<double> residual_trace;
};
class InvalidGrid : public Error {
public:
    explicit InvalidGrid(const std::string& what) : Error(what) {}
};
class NonzeroK22 : public Error {
public:
    explicit NonzeroK22(const std::string& what) : Error(what) {}
};

// cli
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string key)
        : Error(what), key(std::move(key)) {}
    std::string key;
};

}  // namespace cosim
