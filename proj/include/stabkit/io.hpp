#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "hautus.hpp"
#include "pipeline.hpp"
#include "system.hpp"

namespace stabkit {

// 17 significant digits: every double survives the text round trip exactly.
inline std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Structured-text system files:
//   stabkit-system v1
//   n <rows>
//   m <cols>
//   gamma <real>
//   rho0 <real>
//   labels <real> ...          (optional, n entries)
//   A
//   <re im> x n per row, n rows
//   B
//   <re im> x m per row, n rows
// ---------------------------------------------------------------------------

inline void write_system(std::ostream& os, const ControlSystem& sys) {
  os << "stabkit-system v1\n";
  os << "n " << sys.n() << '\n';
  os << "m " << sys.m() << '\n';
  os << "gamma " << fmt17(sys.gamma) << '\n';
  os << "rho0 " << fmt17(sys.rho0) << '\n';
  if (!sys.labels.empty()) {
    os << "labels";
    for (double v : sys.labels) os << ' ' << fmt17(v);
    os << '\n';
  }
  os << "A\n";
  for (int i = 0; i < sys.n(); ++i) {
    for (int j = 0; j < sys.n(); ++j) {
      if (j) os << ' ';
      os << fmt17(sys.A(i, j).real()) << ' ' << fmt17(sys.A(i, j).imag());
    }
    os << '\n';
  }
  os << "B\n";
  for (int i = 0; i < sys.n(); ++i) {
    for (int j = 0; j < sys.m(); ++j) {
      if (j) os << ' ';
      os << fmt17(sys.B(i, j).real()) << ' ' << fmt17(sys.B(i, j).imag());
    }
    os << '\n';
  }
}

namespace detail {

struct LineReader {
  std::istream& in;
  int line = 0;

  // Next non-blank line, with the trailing carriage return stripped.
  bool next(std::string& out) {
    while (std::getline(in, out)) {
      ++line;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      if (out.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  }
};

inline std::vector<double> parse_numbers(const std::string& text, int line) {
  std::vector<double> out;
  const char* p = text.c_str();
  while (*p) {
    while (*p == ' ' || *p == '\t') ++p;
    if (!*p) break;
    char* end = nullptr;
    const double v = std::strtod(p, &end);
    if (end == p)
      throw ParseError("line " + std::to_string(line) +
                           ": expected a number near '" +
                           std::string(p).substr(0, 12) + "'",
                       line);
    out.push_back(v);
    p = end;
  }
  return out;
}

inline Mat parse_matrix_block(LineReader& reader, int rows, int cols,
                              const char* what) {
  Mat M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    std::string row;
    if (!reader.next(row))
      throw ParseError("line " + std::to_string(reader.line + 1) +
                           ": unexpected end of file inside block " + what,
                       reader.line + 1);
    const std::vector<double> vals = parse_numbers(row, reader.line);
    if (static_cast<int>(vals.size()) != 2 * cols)
      throw ParseError("line " + std::to_string(reader.line) + ": block " +
                           what + " row needs " + std::to_string(2 * cols) +
                           " numbers, got " + std::to_string(vals.size()),
                       reader.line);
    for (int j = 0; j < cols; ++j)
      M(i, j) = Cplx(vals[2 * j], vals[2 * j + 1]);
  }
  return M;
}

}  // namespace detail

inline ControlSystem read_system(std::istream& in) {
  detail::LineReader reader{in};
  std::string line;
  if (!reader.next(line) || line != "stabkit-system v1")
    throw ParseError("line 1: expected header 'stabkit-system v1'", 1);

  int n = -1, m = -1;
  double gamma = -1.0, rho0 = 0.0;
  bool have_gamma = false, have_rho0 = false;
  std::vector<double> labels;
  while (true) {
    if (!reader.next(line))
      throw ParseError("line " + std::to_string(reader.line + 1) +
                           ": missing block A",
                       reader.line + 1);
    if (line == "A") break;
    std::istringstream fields(line);
    std::string key, rest;
    fields >> key;
    std::getline(fields, rest);
    const auto one_number = [&](const char* name) {
      const std::vector<double> vals = detail::parse_numbers(rest, reader.line);
      if (vals.size() != 1)
        throw ParseError("line " + std::to_string(reader.line) + ": field " +
                             std::string(name) + " needs one value",
                         reader.line);
      return vals[0];
    };
    if (key == "n") {
      n = static_cast<int>(one_number("n"));
    } else if (key == "m") {
      m = static_cast<int>(one_number("m"));
    } else if (key == "gamma") {
      gamma = one_number("gamma");
      have_gamma = true;
    } else if (key == "rho0") {
      rho0 = one_number("rho0");
      have_rho0 = true;
    } else if (key == "labels") {
      labels = detail::parse_numbers(rest, reader.line);
    } else {
      throw ParseError(
          "line " + std::to_string(reader.line) + ": unknown field '" + key + "'",
          reader.line);
    }
  }
  const int marker_line = reader.line;
  if (n < 1 || m < 1 || !have_gamma || !have_rho0)
    throw ParseError("line " + std::to_string(marker_line) +
                         ": fields n, m, gamma, rho0 must precede block A",
                     marker_line);

  Mat A = detail::parse_matrix_block(reader, n, n, "A");
  if (!reader.next(line))
    throw ParseError("line " + std::to_string(reader.line + 1) +
                         ": missing block marker B",
                     reader.line + 1);
  if (line != "B")
    throw ParseError("line " + std::to_string(reader.line) +
                         ": expected block marker B",
                     reader.line);
  Mat B = detail::parse_matrix_block(reader, n, m, "B");
  if (reader.next(line))
    throw ParseError("line " + std::to_string(reader.line) +
                         ": unexpected trailing content",
                     reader.line);
  if (!labels.empty() && static_cast<int>(labels.size()) != n)
    throw ParseError("labels count does not match n", marker_line);

  ControlSystem sys = make_system(std::move(A), std::move(B), gamma, rho0);
  sys.labels = std::move(labels);
  return sys;
}

inline void write_system_file(const std::string& path,
                              const ControlSystem& sys) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open for writing: " + path);
  write_system(f, sys);
  f.flush();
  if (!f) throw Error("write failed: " + path);
}

inline ControlSystem read_system_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open: " + path);
  return read_system(f);
}

// ---------------------------------------------------------------------------
// Masks: keywords (full | empty | half), run-length text like "32x1,96x0",
// or a literal 0/1 string.  Lengths must match the grid exactly.
// ---------------------------------------------------------------------------

inline std::vector<bool> parse_mask(const std::string& spec, int n) {
  if (n < 1) throw InvalidArgument("parse_mask: grid size must be positive");
  if (spec == "full") return std::vector<bool>(n, true);
  if (spec == "empty") return std::vector<bool>(n, false);
  if (spec == "half") {
    std::vector<bool> mask(n, false);
    for (int j = 0; j < n / 2; ++j) mask[j] = true;
    return mask;
  }
  std::vector<bool> mask;
  mask.reserve(n);
  if (spec.find('x') != std::string::npos) {
    std::istringstream segments(spec);
    std::string seg;
    while (std::getline(segments, seg, ',')) {
      const auto cut = seg.find('x');
      if (cut == std::string::npos || cut == 0 || cut + 2 != seg.size() ||
          (seg[cut + 1] != '0' && seg[cut + 1] != '1'))
        throw InvalidArgument("parse_mask: bad run-length segment '" + seg + "'");
      int count = 0;
      for (size_t i = 0; i < cut; ++i) {
        if (seg[i] < '0' || seg[i] > '9')
          throw InvalidArgument("parse_mask: bad run length in '" + seg + "'");
        count = 10 * count + (seg[i] - '0');
      }
      mask.insert(mask.end(), count, seg[cut + 1] == '1');
    }
  } else {
    for (char c : spec) {
      if (c == ' ' || c == '\t') continue;
      if (c != '0' && c != '1')
        throw InvalidArgument("parse_mask: expected 0/1 digits, found '" +
                              std::string(1, c) + "'");
      mask.push_back(c == '1');
    }
  }
  if (static_cast<int>(mask.size()) != n)
    throw InvalidArgument("parse_mask: mask length " +
                          std::to_string(mask.size()) + " does not match grid " +
                          std::to_string(n));
  return mask;
}

inline std::string mask_rle(const std::vector<bool>& mask) {
  if (mask.empty()) return "";
  std::string out;
  size_t start = 0;
  for (size_t j = 1; j <= mask.size(); ++j) {
    if (j == mask.size() || mask[j] != mask[start]) {
      if (!out.empty()) out += ',';
      out += std::to_string(j - start) + "x" + (mask[start] ? "1" : "0");
      start = j;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV artifacts.  All floats carry 17 significant digits so repeated runs
// can be compared byte for byte.
// ---------------------------------------------------------------------------

inline void write_decay_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,norm,rate_fit\n";
  for (size_t i = 0; i < traj.times.size(); ++i)
    os << fmt17(traj.times[i]) << ',' << fmt17(traj.states[i].norm()) << ','
       << fmt17(traj.fitted_rate) << '\n';
}

inline void write_margins_csv(std::ostream& os, const HautusReport& report) {
  os << "re,im,margin\n";
  for (size_t i = 0; i < report.grid.size(); ++i)
    os << fmt17(report.grid[i].real()) << ',' << fmt17(report.grid[i].imag())
       << ',' << fmt17(report.margins[i]) << '\n';
}

inline void write_matrix_csv(std::ostream& os, const Mat& M) {
  os << "i,j,re,im\n";
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      os << i << ',' << j << ',' << fmt17(M(i, j).real()) << ','
         << fmt17(M(i, j).imag()) << '\n';
}

// ---------------------------------------------------------------------------
// Structured-text reports: a versioned header followed by `key value` lines.
// ---------------------------------------------------------------------------

class TextReport {
 public:
  void add(const std::string& key, const std::string& value) {
    rows_.emplace_back(key, value);
  }
  void add(const std::string& key, const char* value) {
    rows_.emplace_back(key, std::string(value));
  }
  void add(const std::string& key, double value) { add(key, fmt17(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) {
    add(key, std::string(value ? "1" : "0"));
  }
  void add(const std::string& key, Cplx value) {
    add(key, fmt17(value.real()) + " " + fmt17(value.imag()));
  }
  void add_vector(const std::string& key, const Vec& v) {
    std::string text;
    for (int i = 0; i < v.size(); ++i) {
      if (i) text += ' ';
      text += fmt17(v(i).real()) + " " + fmt17(v(i).imag());
    }
    add(key, text);
  }

  std::string str() const {
    std::string out = "stabkit-report v1\n";
    for (const auto& [key, value] : rows_)
      out += key + " " + value + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open for writing: " + path);
  f << body;
  f.flush();
  if (!f) throw Error("write failed: " + path);
}

}  // namespace stabkit
