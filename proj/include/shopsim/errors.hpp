// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace shopsim {

/// Bad input data, configuration or arguments. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Base for everything that originates in a model/embedding/scoring backend.
/// Maps to CLI exit code 2.
class BackendError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A single transport attempt failed; the gateway may retry it.
class TransportError : public BackendError {
  public:
    using BackendError::BackendError;
};

/// Transport kept failing after the retry budget was spent.
class BackendUnavailable : public BackendError {
  public:
    using BackendError::BackendError;
};

class EmptyResponse : public BackendError {
  public:
    using BackendError::BackendError;
};

/// The backend answered, but not in a shape the caller can accept
/// (unknown tool, malformed tool-call payload).
class ProtocolViolation : public BackendError {
  public:
    using BackendError::BackendError;
};

/// Persona mining could not obtain a valid answer. Carries the last raw completion.
class MiningFailed : public std::runtime_error {
  public:
    MiningFailed(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_(std::move(raw)) {}

    [[nodiscard]] const std::string& raw() const noexcept { return raw_; }

  private:
    std::string raw_;
};

class TaskAnswerFailed : public std::runtime_error {
  public:
    TaskAnswerFailed(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_(std::move(raw)) {}

    [[nodiscard]] const std::string& raw() const noexcept { return raw_; }

  private:
    std::string raw_;
};

/// A retail tool rejected a call. The message is fed back to the agent.
class ToolError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace shopsim
