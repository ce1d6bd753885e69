#pragma once

#include <stdexcept>
#include <string>

namespace ofa {

// Root of every error the gateway throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input files or request bodies.
class ParseError : public Error {
public:
    using Error::Error;
};

// Data that parses but breaks a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

// Every token of a text was out of vocabulary (or the text was empty).
class NoResolvableTokens : public Error {
public:
    using Error::Error;
};

// Network failure or non-2xx status from a remote peer.
class TransportError : public Error {
public:
    using Error::Error;
};

// Remote peer answered but the payload broke the wire contract.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class Conflict : public Error {
public:
    using Error::Error;
};

// A turn cannot start because the registry has nothing enabled.
class NoAgentsEnabled : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ofa
