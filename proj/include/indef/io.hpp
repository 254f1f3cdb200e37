#pragma once

// File formats: string specs, Hamiltonians, spectral measures and reports as
// JSON, z-grids and m-samples as CSV.  Reals print with 17 significant
// digits and infinity as the string "inf", so outputs are byte-stable.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "indef/converge.hpp"
#include "indef/spectral.hpp"

namespace indef::io {

using nlohmann::json;

inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  if (std::isnan(v)) return "\"nan\"";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void emit(std::ostream& os, const json& j, int depth) {
  const std::string pad(2 * (depth + 1), ' '), close(2 * depth, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(it.key()).dump() << ": ";
        emit(os, it.value(), depth + 1);
      }
      os << "\n" << close << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        emit(os, j[i], depth + 1);
      }
      os << "\n" << close << "]";
      return;
    }
    case json::value_t::number_float:
      os << format_real(j.get<double>());
      return;
    default:
      os << j.dump();
  }
}

}  // namespace detail

/// Pretty JSON with %.17g reals; keys sorted, LF line endings.
inline void write_json(std::ostream& os, const json& j) {
  detail::emit(os, j, 0);
  os << "\n";
}

inline std::string to_text(const json& j) {
  std::ostringstream os;
  write_json(os, j);
  return os.str();
}

inline json real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double read_real(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
  }
  throw Error(ErrorCode::ParseError, std::string("expected a number or \"inf\" for ") + what);
}

inline json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
  out << text;
}

// --- string specs ---------------------------------------------------------

inline json to_json(const Measure& m) {
  json atoms = json::array(), density = json::array();
  for (const auto& a : m.atoms) atoms.push_back({{"x", a.x}, {"mass", a.mass}});
  for (const auto& p : m.density) density.push_back({{"a", p.a}, {"b", real(p.b)}, {"value", p.value}});
  return {{"atoms", atoms}, {"density", density}};
}

inline json to_json(const StringSpec& s) {
  return {{"L", real(s.length)}, {"omega", to_json(s.omega)}, {"upsilon", to_json(s.upsilon)}};
}

inline Measure measure_from_json(const json& j, const char* what) {
  Measure m;
  if (j.is_null()) return m;
  if (!j.is_object()) throw Error(ErrorCode::ParseError, std::string(what) + " must be an object");
  for (const auto& key : j.items())
    if (key.key() != "atoms" && key.key() != "density")
      throw Error(ErrorCode::ParseError, std::string("unknown key in ") + what + ": " + key.key());
  if (j.contains("atoms")) {
    for (const auto& a : j.at("atoms")) {
      if (!a.contains("x") || !a.contains("mass")) throw Error(ErrorCode::ParseError, "atom needs x and mass");
      m.atoms.push_back({read_real(a.at("x"), "atom x"), read_real(a.at("mass"), "atom mass")});
    }
  }
  if (j.contains("density")) {
    for (const auto& p : j.at("density")) {
      if (!p.contains("a") || !p.contains("b") || !p.contains("value"))
        throw Error(ErrorCode::ParseError, "density piece needs a, b and value");
      m.density.push_back({read_real(p.at("a"), "density a"), read_real(p.at("b"), "density b"),
                           read_real(p.at("value"), "density value")});
    }
  }
  return m;
}

/// Parses and validates a string spec.
inline StringSpec spec_from_json(const json& j) {
  if (!j.is_object() || !j.contains("L")) throw Error(ErrorCode::ParseError, "spec needs \"L\"");
  StringSpec s;
  try {
    s.length = read_real(j.at("L"), "L");
    s.omega = measure_from_json(j.value("omega", json()), "omega");
    s.upsilon = measure_from_json(j.value("upsilon", json()), "upsilon");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return validate_spec(s);
}

inline StringSpec load_spec(const std::string& path) { return spec_from_json(read_file(path)); }

// --- Hamiltonians ---------------------------------------------------------

inline json to_json(const Hamiltonian& H) {
  json pieces = json::array();
  for (const auto& p : H.pieces) pieces.push_back({{"len", real(p.len)}, {"h11", p.h11}, {"h12", p.h12}});
  json j{{"pieces", pieces}};
  if (H.mesh > 0.0) j["mesh"] = H.mesh;
  if (!std::isinf(H.tail_cutoff)) j["tail_cutoff"] = H.tail_cutoff;
  return j;
}

inline Hamiltonian hamiltonian_from_json(const json& j) {
  if (!j.is_object() || !j.contains("pieces") || !j.at("pieces").is_array())
    throw Error(ErrorCode::ParseError, "Hamiltonian needs a \"pieces\" array");
  Hamiltonian H;
  try {
    for (const auto& p : j.at("pieces"))
      H.pieces.push_back({read_real(p.at("len"), "len"), read_real(p.at("h11"), "h11"), read_real(p.at("h12"), "h12")});
    if (j.contains("mesh")) H.mesh = read_real(j.at("mesh"), "mesh");
    if (j.contains("tail_cutoff")) H.tail_cutoff = read_real(j.at("tail_cutoff"), "tail_cutoff");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return validate_hamiltonian(H);
}

inline Hamiltonian load_hamiltonian(const std::string& path) { return hamiltonian_from_json(read_file(path)); }

// --- spectral data and reports ---------------------------------------------

inline json to_json(const SpectralMeasure& mu) {
  json atoms = json::array();
  for (const auto& a : mu.atoms) atoms.push_back({{"lambda", a.lambda}, {"mass", a.mass}});
  json j{{"atoms", atoms}, {"epsilon_used", mu.epsilon_used}};
  if (!mu.continuous.empty()) {
    json c = json::array();
    for (const auto& p : mu.continuous) c.push_back({{"lambda", p.lambda}, {"density", p.density}});
    j["continuous"] = c;
  }
  return j;
}

inline json to_json(const Classification& c) {
  return {{"herglotz", c.herglotz},
          {"stieltjes", c.stieltjes},
          {"nonneg_spectrum_predicted", c.nonneg_spectrum_predicted},
          {"krein_structural", c.krein_structural},
          {"routes_agree", c.routes_agree},
          {"min_im_m", real(c.min_im_m)},
          {"min_im_zm", real(c.min_im_zm)},
          {"max_symmetry_error", real(c.max_symmetry_error)},
          {"tol", c.tol},
          {"grid_size", c.grid_size}};
}

inline json reals(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

inline json to_json(const StringConvergenceReport& r) {
  json sigma = json::array();
  for (const auto& row : r.sigma) sigma.push_back(reals(row));
  json bounded = json::array();
  for (bool b : r.bounded) bounded.push_back(b);
  return {{"xs", reals(r.xs)},
          {"sigma", sigma},
          {"sigma_growth", reals(r.sigma_growth)},
          {"bounded", bounded},
          {"support_sup", r.support_sup},
          {"w_int_diff", reals(r.w_int_diff)},
          {"sigma_int_diff", reals(r.sigma_int_diff)},
          {"verdict", to_string(r.verdict)},
          {"margin", real(r.margin)},
          {"note", r.note}};
}

inline json to_json(const MComparisonReport& r) {
  json grid = json::array();
  for (cd z : r.grid) grid.push_back({z.real(), z.imag()});
  return {{"grid", grid},
          {"sup_diff", reals(r.sup_diff)},
          {"inf_abs", reals(r.inf_abs)},
          {"verdict", to_string(r.verdict)},
          {"margin", real(r.margin)}};
}

inline json to_json(const HamiltonianConvergenceReport& r) {
  return {{"xs", reals(r.xs)},
          {"diff", reals(r.diff)},
          {"diff_infinity", reals(r.diff_infinity)},
          {"verdict", to_string(r.verdict)},
          {"margin", real(r.margin)}};
}

// --- CSV -----------------------------------------------------------------

/// Grid rows "re_z, im_z"; blank lines, '#' comments and a non-numeric
/// header line are skipped.
inline std::vector<cd> parse_grid_csv(std::istream& in) {
  std::vector<cd> out;
  std::string line;
  int lineno = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#') continue;
    std::istringstream row(line);
    std::string a, b, extra;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || std::getline(row, extra, ','))
      throw Error(ErrorCode::ParseError, "grid line " + std::to_string(lineno) + ": expected two columns");
    try {
      std::size_t ia = 0, ib = 0;
      const double re = std::stod(a, &ia), im = std::stod(b, &ib);
      if (a.find_first_not_of(" \t", ia) != std::string::npos || b.find_first_not_of(" \t", ib) != std::string::npos)
        throw std::invalid_argument("trailing characters");
      out.emplace_back(re, im);
    } catch (const std::logic_error&) {
      if (header_allowed && out.empty()) {
        header_allowed = false;
        continue;
      }
      throw Error(ErrorCode::ParseError, "grid line " + std::to_string(lineno) + ": not a number");
    }
    header_allowed = false;
  }
  if (out.empty()) throw Error(ErrorCode::ParseError, "empty grid");
  return out;
}

inline std::vector<cd> load_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return parse_grid_csv(in);
}

}  // namespace indef::io
