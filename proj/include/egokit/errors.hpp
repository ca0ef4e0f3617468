#pragma once

#include <stdexcept>
#include <string>

namespace egokit {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// geometry
struct DegeneratePoint : Error {
    using Error::Error;
};
struct NotARotation : Error {
    using Error::Error;
};
struct DegenerateConfiguration : Error {
    using Error::Error;
};
struct LengthMismatch : Error {
    using Error::Error;
};

// vision
struct SingularWarp : Error {
    using Error::Error;
};

// stabilizer
struct TooFewCorrespondences : Error {
    using Error::Error;
};
struct NoConsensus : Error {
    using Error::Error;
};
struct SingularStep : Error {
    using Error::Error;
};
struct EmptyIntersection : Error {
    using Error::Error;
};
struct StabilizationFailed : Error {
    StabilizationFailed(const std::string& msg, std::size_t frame)
        : Error(msg), frame_index(frame) {}
    std::size_t frame_index;
};

// retarget
struct DimensionMismatch : Error {
    using Error::Error;
};
struct DegenerateHand : Error {
    explicit DegenerateHand(const std::string& msg, long frame = -1)
        : Error(msg), frame_index(frame) {}
    long frame_index;  // -1 when not tied to a specific frame
};

// metrics
struct EmptySet : Error {
    using Error::Error;
};
struct EmptyMask : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct ZeroBaseline : Error {
    using Error::Error;
};

// genmath
struct ShapeMismatch : Error {
    using Error::Error;
};
struct BadSchedule : Error {
    using Error::Error;
};

// pipeline / io
struct IoError : Error {
    using Error::Error;
};
struct InvalidInput : Error {
    using Error::Error;
};

}  // namespace egokit
