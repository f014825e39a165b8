#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace freqbias {

// A caller broke an operation's precondition (bad config, hypothesis of a
// bound violated, index out of range). The CLI maps this to exit code 2.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iterative procedure produced a non-finite state. `where` is the step or
// epoch index at which it was detected. The CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t where)
      : std::runtime_error(what + " (at index " + std::to_string(where) + ")"),
        where_(where) {}

  std::size_t where() const noexcept { return where_; }

 private:
  std::size_t where_;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw PreconditionError(message);
}

}  // namespace freqbias
