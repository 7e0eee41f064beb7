#pragma once

#include <stdexcept>
#include <string>

namespace mfg {

struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

/// Bad user input: config, model parameters, grid sizes.
struct ConfigError : Error
{
  using Error::Error;
};

struct InfeasibleKappa : Error
{
  using Error::Error;
};

/// Backtracking on the coupling's Lipschitz estimate exhausted.
struct StepSizeFailure : Error
{
  using Error::Error;
};

struct IterationLimit : Error
{
  using Error::Error;
};

struct FixedPointStalled : Error
{
  using Error::Error;
};

struct LinearSolveFailure : Error
{
  using Error::Error;
};

/// Missing or malformed result files.
struct ArtifactError : Error
{
  using Error::Error;
};

} // namespace mfg
