#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace chor {

/// Half-open source region, 1-based line/column. line == 0 means "no location".
struct Span {
  int line = 0;
  int col = 0;
  int len = 0;
};

struct SourceFile {
  std::string path;
  std::string text;  // UTF-8
};

enum class Severity { Error, Warning };

/// A single compiler message, renderable as `file:line:col: error[CODE]: message`.
struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;  // E001..E1xx
  std::string message;
  std::string file;
  Span span;

  bool is_error() const { return severity == Severity::Error; }
};

inline std::string render_diagnostic(const Diagnostic& d, bool color = false) {
  std::string out;
  out += d.file;
  out += ':';
  out += std::to_string(d.span.line);
  out += ':';
  out += std::to_string(d.span.col);
  out += ": ";
  const char* kind = d.severity == Severity::Error ? "error" : "warning";
  if (color) {
    out += d.severity == Severity::Error ? "\x1b[31m" : "\x1b[33m";
    out += kind;
    out += "\x1b[0m";
  } else {
    out += kind;
  }
  out += '[';
  out += d.code;
  out += "]: ";
  out += d.message;
  return out;
}

/// Stable presentation order: file, then position, then code.
inline void sort_diagnostics(std::vector<Diagnostic>& ds) {
  std::stable_sort(ds.begin(), ds.end(), [](const Diagnostic& a, const Diagnostic& b) {
    if (a.file != b.file) return a.file < b.file;
    if (a.span.line != b.span.line) return a.span.line < b.span.line;
    if (a.span.col != b.span.col) return a.span.col < b.span.col;
    return a.code < b.code;
  });
}

inline bool has_errors(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds)
    if (d.is_error()) return true;
  return false;
}

}  // namespace chor
