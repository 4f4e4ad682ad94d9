#pragma once

#include <stdexcept>
#include <string>

namespace cds {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument does not hold.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

// The solver reached a state that the theory rules out (zero denominator,
// a support that misses every constraint vertex, ...).
class SolverFault : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class NotFound : public Error {
public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidArgument(what);
}

}  // namespace detail
}  // namespace cds
