#pragma once

#include <stdexcept>
#include <string>

namespace qnac {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (dimension mismatch and similar).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (non-finite entries, empty batch).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (non-convergence, singular system).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Quantity is undefined at the requested point, e.g. J of an unstable gain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Problem exceeds a configured size cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Operation has no meaning for the given environment.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Rollout produced a non-finite state or action.
class RolloutError : public Error {
 public:
  RolloutError(const std::string& what, std::size_t episode, std::size_t step)
      : Error(what + " (episode " + std::to_string(episode) + ", step " +
              std::to_string(step) + ")"),
        episode_(episode),
        step_(step) {}

  [[nodiscard]] std::size_t episode() const noexcept { return episode_; }
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t episode_;
  std::size_t step_;
};

/// Parameter update produced a non-finite iterate.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, std::size_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  [[nodiscard]] std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace qnac
