#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mrisr/errors.hpp"
#include "mrisr/tableau.hpp"

namespace mrisr {

namespace detail {

inline nlohmann::json rational_array(const std::vector<Rational>& v) {
  auto a = nlohmann::json::array();
  for (const auto& x : v) a.push_back(to_string(x));
  return a;
}

inline nlohmann::json rational_matrix_json(const Matrix<Rational>& m) {
  auto a = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) a.push_back(rational_array(m.row(i)));
  return a;
}

inline Rational json_rational(const nlohmann::json& j, const std::string& where) {
  if (j.is_string()) return parse_rational(j.get<std::string>());
  if (j.is_number_integer()) return Rational(j.get<long long>());
  throw FormatError(where + ": expected a fraction string");
}

inline std::vector<Rational> json_row(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + ": expected an array");
  std::vector<Rational> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(json_rational(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

inline Matrix<Rational> json_matrix(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw FormatError(where + ": expected an array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = rows ? j[0].size() : 0;
  Matrix<Rational> m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto r = json_row(j[i], where + "[" + std::to_string(i) + "]");
    if (r.size() != cols) throw FormatError(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = r[c];
  }
  return m;
}

}  // namespace detail

inline nlohmann::json tableau_to_json(const MRISRTableau& t) {
  nlohmann::json j;
  j["name"] = t.name;
  j["s"] = t.stages();
  j["nOmega"] = t.n_omega();
  j["c"] = detail::rational_array(t.c);
  j["omega"] = nlohmann::json::array();
  for (const auto& m : t.omega) j["omega"].push_back(detail::rational_matrix_json(m));
  j["gamma"] = detail::rational_matrix_json(t.gamma);
  if (t.embedding) {
    j["embOmega"] = nlohmann::json::array();
    for (const auto& r : t.embedding->omega) j["embOmega"].push_back(detail::rational_array(r));
    j["embGamma"] = detail::rational_array(t.embedding->gamma);
  }
  return j;
}

/// Parses the interchange format. Structural problems other than malformed
/// JSON or fractions are left for validate_structure to report.
inline MRISRTableau tableau_from_json(const nlohmann::json& j) {
  try {
    MRISRTableau t;
    t.name = j.value("name", std::string("unnamed"));
    t.c = detail::json_row(j.at("c"), "c");
    for (std::size_t k = 0; k < j.at("omega").size(); ++k)
      t.omega.push_back(detail::json_matrix(j.at("omega")[k], "omega[" + std::to_string(k) + "]"));
    t.gamma = detail::json_matrix(j.at("gamma"), "gamma");
    if (j.contains("embOmega") || j.contains("embGamma")) {
      Embedding e;
      for (std::size_t k = 0; k < j.at("embOmega").size(); ++k)
        e.omega.push_back(detail::json_row(j.at("embOmega")[k], "embOmega[" + std::to_string(k) + "]"));
      e.gamma = detail::json_row(j.at("embGamma"), "embGamma");
      t.embedding = std::move(e);
    }
    if (j.contains("s") && j["s"].get<std::size_t>() != t.stages())
      throw FormatError("s = " + std::to_string(j["s"].get<std::size_t>()) + " but c has " +
                        std::to_string(t.stages()) + " entries");
    if (j.contains("nOmega") && j["nOmega"].get<std::size_t>() != t.n_omega())
      throw FormatError("nOmega disagrees with the number of omega matrices");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("tableau JSON: ") + e.what());
  }
}

inline MRISRTableau load_tableau_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open tableau file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
  return tableau_from_json(j);
}

inline void save_tableau_file(const MRISRTableau& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << tableau_to_json(t).dump(2) << "\n";
}

/// Builtin name or path to a tableau file.
inline MRISRTableau resolve_method(const std::string& spec) {
  if (spec.find('/') != std::string::npos || spec.ends_with(".json")) return load_tableau_file(spec);
  return load_builtin(spec);
}

}  // namespace mrisr
