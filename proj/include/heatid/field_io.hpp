#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "heatid/grid.hpp"

namespace heatid {

/// Spatial layout recorded in a field file header.
struct FieldHeader {
  int dim = 1;
  int nx = 0;
  int ny = 1;
  double extent_x = 0;
  double extent_y = 0;
};

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Field CSV text: one header line `# dim=.. nx=.. [ny=..] extent_x=.. [extent_y=..]`
/// followed by one value per node in lexicographic order.
template <typename Scalar>
std::string field_to_csv(const ScalarField<Scalar>& u) {
  const auto& g = u.grid();
  std::ostringstream os;
  os << "# dim=" << g.dim() << " nx=" << g.nodes(0);
  if (g.dim() == 2) os << " ny=" << g.nodes(1);
  os << " extent_x=" << format_real(static_cast<double>(g.extent(0)));
  if (g.dim() == 2) os << " extent_y=" << format_real(static_cast<double>(g.extent(1)));
  os << '\n';
  for (Index k = 0; k < u.size(); ++k) os << format_real(static_cast<double>(u[k])) << '\n';
  return os.str();
}

template <typename Scalar>
void write_field(const std::string& path, const ScalarField<Scalar>& u) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << field_to_csv(u);
  if (!out) throw ValidationError("write failed: " + path);
}

inline FieldHeader parse_field_header(const std::string& line) {
  if (line.rfind("#", 0) != 0) throw ValidationError("field file: missing '#' header line");
  FieldHeader h;
  bool have_nx = false, have_ex = false;
  std::istringstream is(line.substr(1));
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ValidationError("field header: bad token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    try {
      if (key == "dim") h.dim = std::stoi(val);
      else if (key == "nx") h.nx = std::stoi(val), have_nx = true;
      else if (key == "ny") h.ny = std::stoi(val);
      else if (key == "extent_x") h.extent_x = std::stod(val), have_ex = true;
      else if (key == "extent_y") h.extent_y = std::stod(val);
      else throw ValidationError("field header: unknown key '" + key + "'");
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ValidationError*>(&e)) throw;
      throw ValidationError("field header: bad value for '" + key + "'");
    }
  }
  if (!have_nx || !have_ex) throw ValidationError("field header: nx and extent_x are required");
  if (h.dim != 1 && h.dim != 2) throw ValidationError("field header: dim must be 1 or 2");
  return h;
}

/// Reads a field onto `grid`; the file's spatial layout must match it.
template <typename Scalar>
ScalarField<Scalar> read_field(const std::string& path, const GridPtr<Scalar>& grid) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open field file: " + path);
  std::string line;
  std::getline(in, line);
  const FieldHeader h = parse_field_header(line);
  const auto& g = *grid;
  const bool match = h.dim == g.dim() && h.nx == g.nodes(0) && (h.dim == 1 || h.ny == g.nodes(1)) &&
                     std::abs(h.extent_x - static_cast<double>(g.extent(0))) <= 1e-12 * h.extent_x &&
                     (h.dim == 1 ||
                      std::abs(h.extent_y - static_cast<double>(g.extent(1))) <= 1e-12 * h.extent_y);
  if (!match) throw ValidationError("field file layout does not match grid: " + path);
  Vector<Scalar> v(g.size());
  Index k = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (k >= v.size()) throw ValidationError("field file has too many values: " + path);
    try {
      v[k++] = static_cast<Scalar>(std::stod(line));
    } catch (const std::logic_error&) {
      throw ValidationError("field file: bad number '" + line + "' in " + path);
    }
  }
  if (k != v.size()) throw ValidationError("field file has too few values: " + path);
  return ScalarField<Scalar>(grid, std::move(v));
}

}  // namespace heatid
