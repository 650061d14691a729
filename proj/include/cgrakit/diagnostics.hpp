#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cgrakit {

enum class Severity { Warning, Error };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string location;  // e.g. "pe[2][3]", "interconnect[5]", "edge 7"
  std::string message;

  std::string str() const {
    return (severity == Severity::Error ? "error: " : "warning: ") +
           (location.empty() ? "" : location + ": ") + message;
  }
};

inline bool has_errors(const std::vector<Diagnostic>& diags) {
  for (const auto& d : diags)
    if (d.severity == Severity::Error) return true;
  return false;
}

inline std::string join_diagnostics(const std::vector<Diagnostic>& diags) {
  std::string out;
  for (const auto& d : diags) {
    if (!out.empty()) out += "\n";
    out += d.str();
  }
  return out;
}

// Malformed input text (bad JSON, wrong types, unknown keys).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Structurally valid input that violates cross-reference rules.
class SemanticError : public std::runtime_error {
 public:
  SemanticError(const std::string& what, std::vector<Diagnostic> diags = {})
      : std::runtime_error(what), diagnostics(std::move(diags)) {}
  std::vector<Diagnostic> diagnostics;
};

}  // namespace cgrakit
