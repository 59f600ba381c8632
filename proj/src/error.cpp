/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/error.hpp"

namespace tempex {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::RatingOutOfRange: return "RatingOutOfRange";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SameUser: return "SameUser";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::UnknownUser: return "UnknownUser";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace tempex
