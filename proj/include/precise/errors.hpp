#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace precise {

/// Malformed or inconsistent input data. Carries the 1-based line number
/// and/or query id of the offending record when known.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what,
                      std::optional<std::size_t> line = std::nullopt,
                      std::optional<std::string> query_id = std::nullopt)
      : std::runtime_error(Format(what, line, query_id)),
        line_(line),
        query_id_(std::move(query_id)) {}

  const std::optional<std::size_t>& line() const { return line_; }
  const std::optional<std::string>& query_id() const { return query_id_; }

 private:
  static std::string Format(const std::string& what,
                            const std::optional<std::size_t>& line,
                            const std::optional<std::string>& query_id) {
    std::string out;
    if (line) out += "line " + std::to_string(*line) + ": ";
    if (query_id) out += "query '" + *query_id + "': ";
    return out + what;
  }

  std::optional<std::size_t> line_;
  std::optional<std::string> query_id_;
};

/// A statistical precondition does not hold (too few samples, intractable
/// enumeration, pool too small for the requested protocol).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace precise
