#pragma once

#include <stdexcept>
#include <string>

namespace geclab {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model or policy violates a structural invariant (stochasticity, budget, shape).
class ModelError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or input file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Conditional queried on a history of zero probability.
class UnreachableHistory : public Error {
 public:
  using Error::Error;
};

// An enumeration would exceed its configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Emission matrix of the core tests is not of full column rank.
class RankError : public Error {
 public:
  RankError(const std::string& what, double sigma_min)
      : Error(what), sigma_min_(sigma_min) {}
  double sigma_min() const { return sigma_min_; }

 private:
  double sigma_min_;
};

// Supplied or inferred decoder is inconsistent with the latent dynamics.
class DecoderError : public Error {
 public:
  using Error::Error;
};

// Failure inside an agent run, tagged with the 1-based episode index.
class RunError : public Error {
 public:
  RunError(const std::string& what, int episode) : Error(what), episode_(episode) {}
  int episode() const { return episode_; }

 private:
  int episode_;
};

}  // namespace geclab
