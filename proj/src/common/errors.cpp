/* Copyright 2026 The grserve Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "common/errors.h"

namespace grserve {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
      return "configuration error";
    case ErrorCode::kSequencing:
      return "sequencing error";
    case ErrorCode::kPlan:
      return "plan error";
    case ErrorCode::kShape:
      return "shape error";
    case ErrorCode::kInput:
      return "input error";
    case ErrorCode::kState:
      return "state error";
    case ErrorCode::kDeadBeam:
      return "dead beam";
    case ErrorCode::kDeadPrefix:
      return "dead prefix";
    case ErrorCode::kNoValidCandidate:
      return "no valid candidate";
    case ErrorCode::kUndefinedAttention:
      return "undefined attention";
    case ErrorCode::kTraining:
      return "training error";
    case ErrorCode::kOutOfMemory:
      return "out of memory";
    case ErrorCode::kBackpressure:
      return "backpressure";
    case ErrorCode::kIo:
      return "I/O error";
  }
  return "unknown error";
}

}  // namespace grserve
