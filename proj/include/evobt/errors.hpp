#pragma once

#include <stdexcept>
#include <string>

namespace evobt {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// chromosome documents
struct ParseError : Error { using Error::Error; };
struct SchemaError : Error { using Error::Error; };
struct InvariantError : Error { using Error::Error; };
struct DepthOutOfRange : Error { using Error::Error; };

// compile
struct CompileError : Error { using Error::Error; };
struct UnknownNodeId : CompileError { using CompileError::CompileError; };
struct ArityViolation : CompileError { using CompileError::CompileError; };
struct PropertyOutOfRange : CompileError { using CompileError::CompileError; };

// fitness
struct UndeclaredKey : Error { using Error::Error; };

// arena
struct BlockedStart : Error { using Error::Error; };
struct MapError : Error { using Error::Error; };

// experiment
struct ConfigError : Error { using Error::Error; };

}  // namespace evobt
