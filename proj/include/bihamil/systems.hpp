#pragma once

// Catalog of test systems with hand-checked structure.
//
// Config file schema (JSON):
//
//   {
//     "schema_version": 1,
//     "systems": [
//       { "name": "euler-top",
//         "field": "y*z, x*z, x*y",
//         "hamiltonians": ["(x^2 - y^2)/2", "(y^2 - z^2)/2"],   // optional
//         "poisson": ["x, -y, 0", "0, -y, z"],                  // optional
//         "seed": [1, 2, 3],
//         "notes": "..." }
//     ]
//   }
//
// With both pairs present, v = J1×∇H2 = J2×∇H1.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bihamil/error.hpp"
#include "bihamil/expr.hpp"
#include "bihamil/poisson.hpp"

namespace bihamil {

struct CatalogEntry {
  std::string name;
  VectorFieldSpec field;
  std::optional<std::pair<ExprAst, ExprAst>> known_hamiltonians;
  std::optional<std::pair<VectorFieldSpec, VectorFieldSpec>> known_poisson;
  Vec3 recommended_seed;
  std::string notes;
};

class UnknownSystem : public Error {
 public:
  UnknownSystem(const std::string& name, const std::vector<std::string>& available)
      : Error("unknown system '" + name + "'; available: " + join(available)) {}

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& n : v) s += (s.empty() ? "" : ", ") + n;
    return s;
  }
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

struct CatalogResiduals {
  double hamilton{0.0};  // max ‖v − J×∇H‖ over the available pairings
  double conservation{0.0};  // max |∇H_k·v|
  double jacobi{0.0};
  double compatibility{0.0};
  double nambu{0.0};
  double psi{1.0};
};

/// Residuals of an entry's known data at p. Throws DegenerateGradients where
/// ∇H1×∇H2 vanishes.
inline CatalogResiduals catalog_residuals(const CatalogEntry& e, const Vec3& p) {
  CatalogResiduals r;
  if (e.known_hamiltonians) {
    const auto& [h1, h2] = *e.known_hamiltonians;
    const VectorField g1 = gradient_field(h1);
    const auto hr = hamilton_residual(g1, h2, e.field, p);
    r.hamilton = norm(hr.vec_residual);
    r.conservation = std::max(std::abs(hr.grad_h_dot_v), std::abs(dot(gradient(ScalarField(h1), p), evaluate(e.field, p))));
    const auto nr = nambu_residual(e.field, h1, h2, p);
    r.nambu = nr.residual;
    r.psi = nr.psi;
  }
  if (e.known_poisson) {
    const VectorField j1 = e.known_poisson->first, j2 = e.known_poisson->second;
    r.jacobi = std::max(std::abs(jacobi_residual(j1, p)), std::abs(jacobi_residual(j2, p)));
    r.compatibility = std::abs(compatibility_residual(j1, j2, p));
    if (e.known_hamiltonians) {
      const auto& [h1, h2] = *e.known_hamiltonians;
      r.hamilton = std::max({r.hamilton, norm(hamilton_residual(j1, h2, e.field, p).vec_residual),
                             norm(hamilton_residual(j2, h1, e.field, p).vec_residual)});
      r.conservation = std::max(r.conservation, std::abs(hamilton_residual(j1, h2, e.field, p).j_dot_v));
    }
  }
  return r;
}

/// Rejects entries whose known data fail at their own seed.
inline void validate_entry(const CatalogEntry& e, double tol = 1e-9) {
  if (!e.known_hamiltonians && !e.known_poisson) return;
  const CatalogResiduals r = catalog_residuals(e, e.recommended_seed);
  const double worst = std::max({r.hamilton, r.conservation, r.jacobi, r.compatibility, r.nambu});
  if (!(worst <= tol)) throw CatalogError("catalog entry '" + e.name + "' fails its own residual checks at the seed");
}

class Catalog {
 public:
  void add(CatalogEntry e) {
    validate_entry(e);
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& x) { return x.name == e.name; });
    if (it != entries_.end()) {
      *it = std::move(e);
    } else {
      entries_.push_back(std::move(e));
    }
  }

  const CatalogEntry& get(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e;
    throw UnknownSystem(name, names());
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& e : entries_) n.push_back(e.name);
    return n;
  }

  const std::vector<CatalogEntry>& entries() const { return entries_; }

 private:
  std::vector<CatalogEntry> entries_;
};

inline CatalogEntry make_entry(std::string name, std::string_view field, std::optional<std::pair<std::string, std::string>> h,
                               std::optional<std::pair<std::string, std::string>> j, Vec3 seed, std::string notes) {
  CatalogEntry e;
  e.name = std::move(name);
  e.field = parse_vector(field);
  if (h) e.known_hamiltonians = std::make_pair(parse_scalar(h->first), parse_scalar(h->second));
  if (j) e.known_poisson = std::make_pair(parse_vector(j->first), parse_vector(j->second));
  e.recommended_seed = seed;
  e.notes = std::move(notes);
  return e;
}

inline const Catalog& builtin_catalog() {
  static const Catalog cat = [] {
    Catalog c;
    c.add(make_entry("euler-top", "y*z, x*z, x*y", std::make_pair("(x^2 - y^2)/2", "(y^2 - z^2)/2"),
                     std::make_pair("x, -y, 0", "0, -y, z"), {1.0, 2.0, 3.0},
                     "Euler top; v = grad H1 x grad H2, J1 = grad H1, J2 = -grad H2"));
    c.add(make_entry("circular", "-y, x, 0", std::make_pair("-(x^2 + y^2)/2", "z"),
                     std::make_pair("-x, -y, 0", "0, 0, -1"), {1.0, 0.0, 0.0},
                     "rigid rotation about the z axis; all frame helicities vanish"));
    c.add(make_entry("helical", "-y, x, 1", std::nullopt, std::nullopt, {1.0, 0.0, 0.0},
                     "helical flow; no closed-form pair shipped"));
    c.add(make_entry("constant", "1, 0, 0", std::nullopt, std::nullopt, {0.0, 0.0, 0.0},
                     "uniform flow; the normal is undefined everywhere"));
    return c;
  }();
  return cat;
}

inline const CatalogEntry& get_system(const std::string& name) { return builtin_catalog().get(name); }

inline constexpr int kCatalogSchemaVersion = 1;

inline CatalogEntry entry_from_json(const nlohmann::json& j) {
  try {
    std::optional<std::pair<std::string, std::string>> h, p;
    if (j.contains("hamiltonians")) {
      const auto& a = j.at("hamiltonians");
      if (!a.is_array() || a.size() != 2) throw CatalogError("'hamiltonians' must hold two expressions");
      h = std::make_pair(a[0].get<std::string>(), a[1].get<std::string>());
    }
    if (j.contains("poisson")) {
      const auto& a = j.at("poisson");
      if (!a.is_array() || a.size() != 2) throw CatalogError("'poisson' must hold two vector fields");
      p = std::make_pair(a[0].get<std::string>(), a[1].get<std::string>());
    }
    Vec3 seed;
    if (j.contains("seed")) {
      const auto& s = j.at("seed");
      if (!s.is_array() || s.size() != 3) throw CatalogError("'seed' must hold three numbers");
      seed = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
    }
    return make_entry(j.at("name").get<std::string>(), j.at("field").get<std::string>(), h, p, seed,
                      j.value("notes", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError(std::string("malformed catalog entry: ") + e.what());
  }
}

inline nlohmann::json entry_to_json(const CatalogEntry& e) {
  nlohmann::json j{{"name", e.name}, {"field", e.field.to_string()}};
  if (e.known_hamiltonians)
    j["hamiltonians"] = {e.known_hamiltonians->first.to_string(), e.known_hamiltonians->second.to_string()};
  if (e.known_poisson) j["poisson"] = {e.known_poisson->first.to_string(), e.known_poisson->second.to_string()};
  j["seed"] = {e.recommended_seed[0], e.recommended_seed[1], e.recommended_seed[2]};
  j["notes"] = e.notes;
  return j;
}

/// Built-in entries plus those in the file; file entries replace built-ins of
/// the same name.
inline Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("cannot open catalog file '" + path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError("catalog file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("schema_version", 0) != kCatalogSchemaVersion)
    throw CatalogError("catalog file '" + path + "' must have schema_version " + std::to_string(kCatalogSchemaVersion));
  if (!doc.contains("systems") || !doc["systems"].is_array())
    throw CatalogError("catalog file '" + path + "' needs a 'systems' array");
  Catalog c = builtin_catalog();
  for (const auto& j : doc["systems"]) c.add(entry_from_json(j));
  return c;
}

}  // namespace bihamil
