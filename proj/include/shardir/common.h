/* Copyright 2026 The Shardir Authors. All Rights Reserved.

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

#ifndef SHARDIR_COMMON_H_
#define SHARDIR_COMMON_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shardir {

// All errors carry a stable category name so CLI diagnostics and tests can
// match on them without parsing prose.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(category + ": " + message),
        category_(std::move(category)) {}
  const std::string& category() const { return category_; }

 private:
  std::string category_;
};

#define SHARDIR_DEFINE_ERROR(NAME)                     \
  class NAME : public Error {                          \
   public:                                             \
    explicit NAME(const std::string& message)          \
        : Error(#NAME, message) {}                     \
  }

SHARDIR_DEFINE_ERROR(ShapeMismatch);
SHARDIR_DEFINE_ERROR(UnknownOperand);
SHARDIR_DEFINE_ERROR(InvalidAttribute);
SHARDIR_DEFINE_ERROR(SyntaxError);
SHARDIR_DEFINE_ERROR(MissingInput);
SHARDIR_DEFINE_ERROR(UnsupportedOp);
SHARDIR_DEFINE_ERROR(InvalidSharding);
SHARDIR_DEFINE_ERROR(ConflictingAnnotations);
SHARDIR_DEFINE_ERROR(ShardCountMismatch);
SHARDIR_DEFINE_ERROR(DeadlockDetected);
SHARDIR_DEFINE_ERROR(DuplicateDestination);
SHARDIR_DEFINE_ERROR(UnsupportedWindowConfig);
SHARDIR_DEFINE_ERROR(UnknownKind);
SHARDIR_DEFINE_ERROR(UnknownPattern);
SHARDIR_DEFINE_ERROR(CapacityNonPositive);
SHARDIR_DEFINE_ERROR(IoError);

#undef SHARDIR_DEFINE_ERROR

}  // namespace shardir

#endif  // SHARDIR_COMMON_H_
