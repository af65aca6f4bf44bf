#pragma once

#include <stdexcept>
#include <string>

namespace encsim {

// Base for all library errors. Validation failures derive from Error;
// file-system problems use IoError so the CLI can map them to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedRow : Error {
    using Error::Error;
};
struct InvalidInterval : Error {
    using Error::Error;
};
struct SelfEncounter : Error {
    using Error::Error;
};
struct UnknownNode : Error {
    using Error::Error;
};
struct SeriesTooShort : Error {
    using Error::Error;
};
struct InvalidComponent : Error {
    using Error::Error;
};
struct UnknownPeer : Error {
    using Error::Error;
};
struct SpeedLimit : Error {
    using Error::Error;
};
struct EmptyProfile : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct NoOverlap : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace encsim
