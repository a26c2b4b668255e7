// Copyright 2026 The fracdown Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fracdown/error.hpp"

namespace fracdown {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidShape: return "invalid-shape";
    case ErrorCode::kShapeMismatch: return "shape-mismatch";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kInvalidLength: return "invalid-length";
    case ErrorCode::kInvalidScale: return "invalid-scale";
    case ErrorCode::kIndivisibleSize: return "indivisible-size";
    case ErrorCode::kChannelMismatch: return "channel-mismatch";
    case ErrorCode::kNonIntegerScale: return "non-integer-scale";
    case ErrorCode::kInfeasibleKind: return "infeasible-kind-for-scale";
    case ErrorCode::kNoForwardState: return "no-forward-state";
    case ErrorCode::kScaleTooLarge: return "scale-too-large";
    case ErrorCode::kImageTooSmall: return "image-too-small";
    case ErrorCode::kEmptyDataset: return "empty-dataset";
    case ErrorCode::kNonFiniteLoss: return "non-finite-loss";
    case ErrorCode::kImageSmallerThanWindow: return "image-smaller-than-window";
    case ErrorCode::kNoOverlap: return "no-overlap";
    case ErrorCode::kTooFewPoints: return "too-few-points";
    case ErrorCode::kNonMonotoneCurve: return "non-monotone-curve";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kDecodeError: return "decode-error";
    case ErrorCode::kInvalidDims: return "invalid-dims";
    case ErrorCode::kOddDims: return "odd-dims";
    case ErrorCode::kUnsupportedColorspace: return "unsupported-colorspace";
    case ErrorCode::kTruncatedFile: return "truncated-file";
    case ErrorCode::kBadCheckpoint: return "bad-checkpoint";
    case ErrorCode::kBadConfig: return "bad-config";
    case ErrorCode::kEncoderFailure: return "encoder-failure";
    case ErrorCode::kMetricFailure: return "metric-failure";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kCurveMismatch: return "curve-mismatch";
    case ErrorCode::kMismatchedConfigs: return "mismatched-configs";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace fracdown
