#include "xwalk/error.hpp"

namespace xwalk {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::UnpairedPhaseEvent: return "UnpairedPhaseEvent";
    case ErrorKind::SingularCalibration: return "SingularCalibration";
    case ErrorKind::UnknownArea: return "UnknownArea";
    case ErrorKind::OverlappingAreaConfig: return "OverlappingAreaConfig";
    case ErrorKind::InvalidAreaConfig: return "InvalidAreaConfig";
    case ErrorKind::DegenerateTrajectory: return "DegenerateTrajectory";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::AllFeaturesConstant: return "AllFeaturesConstant";
    case ErrorKind::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorKind::UntrainedModel: return "UntrainedModel";
    case ErrorKind::SampleTooLarge: return "SampleTooLarge";
    case ErrorKind::NoCrossingExit: return "NoCrossingExit";
    case ErrorKind::TimelineGap: return "TimelineGap";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorKind::DivergedTraining: return "DivergedTraining";
    case ErrorKind::TrajectoryTooShort: return "TrajectoryTooShort";
    case ErrorKind::EmptyTestSet: return "EmptyTestSet";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::UnknownAnomaly: return "UnknownAnomaly";
    case ErrorKind::UnknownAgent: return "UnknownAgent";
    case ErrorKind::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
    case ErrorKind::ConfigValidationError: return "ConfigValidationError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace xwalk
