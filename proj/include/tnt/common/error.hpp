#pragma once

#include <stdexcept>
#include <string>

namespace tnt {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/image dimension mismatch.
class ShapeError : public Error {
public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Mask extraction found no foreground pixels.
class EmptyPatch : public Error {
public:
  explicit EmptyPatch(const std::string& msg) : Error(msg) {}
};

/// Scaled patch does not fit inside the target canvas.
class PlacementOverflow : public Error {
public:
  explicit PlacementOverflow(const std::string& msg) : Error(msg) {}
};

class DatasetEmpty : public Error {
public:
  explicit DatasetEmpty(const std::string& msg) : Error(msg) {}
};

/// Labels or layout inconsistent with the declared schema.
class DatasetSchemaError : public Error {
public:
  explicit DatasetSchemaError(const std::string& msg) : Error(msg) {}
};

/// GAN training produced a non-finite loss. Carries the path of the last
/// checkpoint that was still healthy, when one exists.
class TrainingDiverged : public Error {
public:
  TrainingDiverged(const std::string& msg, std::string last_good)
      : Error(msg), last_good_checkpoint(std::move(last_good)) {}
  std::string last_good_checkpoint;
};

/// Generator fine-tuning failed to recover after repeated step-size halvings.
class FinetuneDiverged : public Error {
public:
  explicit FinetuneDiverged(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace tnt
