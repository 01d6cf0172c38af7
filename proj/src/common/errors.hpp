// Copyright 2026 The mixctc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MIXCTC_COMMON_ERRORS_HPP
#define MIXCTC_COMMON_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mixctc {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define MIXCTC_DEFINE_ERROR(NAME)               \
  struct NAME : Error {                         \
    using Error::Error;                         \
  }

MIXCTC_DEFINE_ERROR(ShapeMismatch);
MIXCTC_DEFINE_ERROR(NotScalar);
MIXCTC_DEFINE_ERROR(EmptyOutput);
MIXCTC_DEFINE_ERROR(InfeasibleAlignment);
MIXCTC_DEFINE_ERROR(TooLarge);
MIXCTC_DEFINE_ERROR(TooNarrow);
MIXCTC_DEFINE_ERROR(InvalidConfig);
MIXCTC_DEFINE_ERROR(InvalidDepth);
MIXCTC_DEFINE_ERROR(BatchTooSmall);
MIXCTC_DEFINE_ERROR(UnknownGlyph);
MIXCTC_DEFINE_ERROR(MalformedManifest);
MIXCTC_DEFINE_ERROR(MalformedPGM);
MIXCTC_DEFINE_ERROR(EmptyDataset);
MIXCTC_DEFINE_ERROR(LengthMismatch);
MIXCTC_DEFINE_ERROR(ConfigMismatch);
MIXCTC_DEFINE_ERROR(NonFiniteLoss);
MIXCTC_DEFINE_ERROR(IoError);

#undef MIXCTC_DEFINE_ERROR

}  // namespace mixctc

#endif  // MIXCTC_COMMON_ERRORS_HPP
