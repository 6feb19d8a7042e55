#pragma once

#include <stdexcept>
#include <string>

namespace lfads {

// Base for all errors thrown by the library. `category()` is a stable short
// tag the CLI prints in front of the message.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& msg)
      : std::runtime_error(msg), category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

class ValueError : public Error {
 public:
  explicit ValueError(const std::string& msg) : Error("value", msg) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error("io", msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& msg) : Error("training", msg) {}
};

}  // namespace lfads
