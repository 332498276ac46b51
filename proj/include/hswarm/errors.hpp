#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hswarm {

/// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while running an instantiated system; carries the failing node.
class ExecutionError : public std::runtime_error {
 public:
  ExecutionError(std::size_t node, const std::string& what)
      : std::runtime_error("node " + std::to_string(node) + ": " + what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// A role-step or weight-step failed on one particle or assignment.
class StepError : public std::runtime_error {
 public:
  StepError(std::string step, std::size_t index, const std::string& what)
      : std::runtime_error(step + " failed at index " + std::to_string(index) + ": " + what),
        step_(std::move(step)),
        index_(index) {}
  const std::string& step() const { return step_; }
  std::size_t index() const { return index_; }

 private:
  std::string step_;
  std::size_t index_;
};

/// Invalid configuration value; key() names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace hswarm
