#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace pmv {

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ArrayT = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

// All model math runs in double; matrices are row-major so a flat view of a
// batch matches the tensor layout.
using Matrix = MatrixT<double>;
using Vector = VectorT<double>;
using ArrayX = ArrayT<double>;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or width disagreement between an input and a parameter set.
struct DimensionError : Error {
  using Error::Error;
};
// An invalid field in a user-supplied configuration.
struct ConfigError : Error {
  using Error::Error;
};
// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};
// Class label outside [0, C).
struct LabelError : Error {
  using Error::Error;
};
// Input that collapses an operation (zero-norm feature under an angular metric).
struct DegenerateInputError : Error {
  using Error::Error;
};
// A stated call precondition was violated (unnormalized head rows, batch too small).
struct PreconditionError : Error {
  using Error::Error;
};
// Non-finite value produced where the contract requires finite results.
struct NumericError : Error {
  using Error::Error;
};
// Dataset cannot support the requested operation (too few identities/samples).
struct DatasetError : Error {
  using Error::Error;
};
// Evaluation protocol preconditions not met (single-label score set, < 10 pairs).
struct ProtocolError : Error {
  using Error::Error;
};
// Training loop failure (sampler drain, aborted step).
struct TrainingError : Error {
  using Error::Error;
};

struct CheckpointError : Error {
  using Error::Error;
};
struct CheckpointVersionError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointTruncationError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct CheckpointDescriptorError : CheckpointError {
  using CheckpointError::CheckpointError;
};

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace pmv
