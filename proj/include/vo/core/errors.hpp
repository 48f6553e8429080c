// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vo {

// Base class for all recoverable errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define VO_DEFINE_ERROR(Name)                                          \
  struct Name : Error {                                                \
    Name() : Error(#Name) {}                                           \
    explicit Name(const std::string& msg) : Error(std::string(#Name) + \
                                                  ": " + msg) {}       \
  }

VO_DEFINE_ERROR(NonPositiveDepth);
VO_DEFINE_ERROR(DimensionMismatch);
VO_DEFINE_ERROR(EmptySet);
VO_DEFINE_ERROR(InsufficientCorrespondences);
VO_DEFINE_ERROR(DegenerateConfiguration);
VO_DEFINE_ERROR(NonConvergence);
VO_DEFINE_ERROR(InsufficientOverlap);
VO_DEFINE_ERROR(NoViableSolver);
VO_DEFINE_ERROR(ParallelRays);
VO_DEFINE_ERROR(NegativeDepth);
VO_DEFINE_ERROR(EmptySystem);
VO_DEFINE_ERROR(SingularSystem);
VO_DEFINE_ERROR(NonPositiveInput);
VO_DEFINE_ERROR(AssociationFailure);
VO_DEFINE_ERROR(PathTooShort);
VO_DEFINE_ERROR(ParseError);
VO_DEFINE_ERROR(TrackingLost);
VO_DEFINE_ERROR(EmptyView);
VO_DEFINE_ERROR(IoError);

#undef VO_DEFINE_ERROR

}  // namespace vo
