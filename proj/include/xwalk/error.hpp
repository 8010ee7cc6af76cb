#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xwalk {

/// Machine-readable failure categories. Every error surfaced by the library
/// carries one of these so the CLI can report it without parsing messages.
enum class ErrorKind {
  MissingFile,
  SchemaMismatch,
  UnpairedPhaseEvent,
  SingularCalibration,
  UnknownArea,
  OverlappingAreaConfig,
  InvalidAreaConfig,
  DegenerateTrajectory,
  InsufficientSamples,
  AllFeaturesConstant,
  SingleClassTrainingSet,
  UntrainedModel,
  SampleTooLarge,
  NoCrossingExit,
  TimelineGap,
  DimensionMismatch,
  EmptyTrainSet,
  DivergedTraining,
  TrajectoryTooShort,
  EmptyTestSet,
  InvalidConfig,
  UnknownAnomaly,
  UnknownAgent,
  MissingUpstreamArtifact,
  ConfigValidationError,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace xwalk
