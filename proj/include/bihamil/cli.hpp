#pragma once

// Command-line front end. run() parses argv, executes one subcommand and
// writes a report; it returns the process exit code:
//   0 success, 1 usage/parse/other errors, 2 computation aborted by a
//   degenerate geometry (frame degeneracy, |Ω_b| below floor, parallel
//   gradients).

#include <charconv>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bihamil/calc3.hpp"
#include "bihamil/error.hpp"
#include "bihamil/expr.hpp"
#include "bihamil/frenet.hpp"
#include "bihamil/poisson.hpp"
#include "bihamil/report.hpp"
#include "bihamil/riccati.hpp"
#include "bihamil/systems.hpp"

namespace bihamil::cli {

inline constexpr std::string_view kGrammar = R"(Field DSL:
  expr    := term (('+' | '-') term)*
  term    := unary (('*' | '/') unary)*
  unary   := '-' unary | power
  power   := primary ('^' unary)?        right-associative; exponent must be constant
  primary := number | x | y | z | pi | func '(' expr ')' | '(' expr ')'
  func    := sin cos tan exp ln sqrt tanh abs
  vector fields are three expressions separated by commas: "-y, x, 1"
)";

struct Options {
  std::string field;
  std::string system;
  std::string catalog;
  std::string point;
  std::string seed;
  double smax{10.0};
  std::vector<double> mu0;
  double alpha0{1.0};
  std::string box{"-2,2,-2,2,-2,2"};
  std::size_t samples{100};
  double tol{1e-9};
  double fd_step{0.0};
  std::string format{"json"};
  std::string output;

  double eps_v{1e-10};
  double eps_deg{1e-8};
  double eps_omega{1e-7};
  double chart_switch{2.0};
  double omega_b_floor{1e-6};
  double eps_u{1e-12};
  double sample_step{0.02};
  double max_step{0.0};
  bool backward{false};

  bool linear{false};
  double u0{1.0};
  double du0{0.0};

  std::string h1, h2;
  std::vector<std::string> poisson;
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, std::size_t count, const char* flag) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    std::string item = text.substr(pos, end - pos);
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    item = first == std::string::npos ? "" : item.substr(first, last - first + 1);
    double v = 0.0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || r.ec != std::errc() || r.ptr != item.data() + item.size())
      throw UsageError(std::string(flag) + " expects " + std::to_string(count) + " comma-separated numbers, got '" +
                       text + "'");
    out.push_back(v);
    pos = end + 1;
  }
  if (out.size() != count)
    throw UsageError(std::string(flag) + " expects " + std::to_string(count) + " comma-separated numbers, got '" + text +
                     "'");
  return out;
}

inline Vec3 parse_vec3(const std::string& text, const char* flag) {
  const auto v = parse_numbers(text, 3, flag);
  return {v[0], v[1], v[2]};
}

inline Json vec_json(const Vec3& v) { return Json::array({cell(v[0]), cell(v[1]), cell(v[2])}); }

struct Context {
  const Options& o;
  Report& report;
  std::optional<Catalog> catalog;

  const Catalog& cat() {
    if (!catalog) catalog = o.catalog.empty() ? builtin_catalog() : load_catalog(o.catalog);
    return *catalog;
  }

  const CatalogEntry* entry() {
    if (o.system.empty()) return nullptr;
    return &cat().get(o.system);
  }

  VectorFieldSpec field() {
    if (!o.field.empty() && !o.system.empty()) throw UsageError("give either --field or --system, not both");
    if (const auto* e = entry()) {
      report.input["system"] = e->name;
      report.input["field"] = e->field.to_string();
      return e->field;
    }
    if (o.field.empty()) throw UsageError("a vector field is required: --field \"fx,fy,fz\" or --system NAME");
    VectorFieldSpec v = parse_vector(o.field);
    report.input["field"] = v.to_string();
    return v;
  }

  Vec3 point() {
    if (o.point.empty()) throw UsageError("--point X,Y,Z is required");
    const Vec3 p = parse_vec3(o.point, "--point");
    report.input["point"] = vec_json(p);
    return p;
  }

  Vec3 seed() {
    Vec3 s;
    if (!o.seed.empty()) {
      s = parse_vec3(o.seed, "--seed");
    } else if (const auto* e = entry()) {
      s = e->recommended_seed;
    } else {
      throw UsageError("--seed X,Y,Z is required");
    }
    report.input["seed"] = vec_json(s);
    return s;
  }

  FrameOptions frame() const {
    FrameOptions f;
    f.eps_v_scale = o.eps_v;
    f.eps_deg = o.eps_deg;
    f.fd_step = o.fd_step;
    return f;
  }

  RiccatiOptions riccati() const {
    RiccatiOptions r;
    r.frame = frame();
    r.integrator.rtol = o.tol;
    r.integrator.atol = o.tol;
    r.integrator.sample_step = o.sample_step;
    r.integrator.max_step = o.max_step;
    r.integrator.backward = o.backward;
    r.chart_switch = o.chart_switch;
    return r;
  }
};

inline void check_options(const Options& o) {
  if (o.fd_step < 0.0) throw UsageError("--fd-step must be positive (0 selects the default)");
  if (!(o.tol > 0.0)) throw UsageError("--tol must be positive");
  if (!(o.smax > 0.0)) throw UsageError("--smax must be positive");
  if (!(o.sample_step > 0.0)) throw UsageError("--sample-step must be positive");
  if (o.samples == 0) throw UsageError("--samples must be positive");
}

inline Json options_json(const Options& o) {
  return Json{{"smax", o.smax},           {"mu0", o.mu0},
              {"alpha0", o.alpha0},       {"box", o.box},
              {"samples", o.samples},     {"tol", o.tol},
              {"fd_step", o.fd_step},     {"eps_v", o.eps_v},
              {"eps_deg", o.eps_deg},     {"eps_omega", o.eps_omega},
              {"chart_switch", o.chart_switch}, {"omega_b_floor", o.omega_b_floor},
              {"eps_u", o.eps_u},         {"sample_step", o.sample_step},
              {"max_step", o.max_step},   {"backward", o.backward}};
}

inline void append_vec(std::vector<Json>& row, const Vec3& v) {
  for (std::size_t i = 0; i < 3; ++i) row.push_back(cell(v[i]));
}

inline std::vector<std::string> vec_cols(const std::string& base) { return {base + "_x", base + "_y", base + "_z"}; }

inline void add_cols(std::vector<std::string>& cols, const std::vector<std::string>& more) {
  cols.insert(cols.end(), more.begin(), more.end());
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_frame(Context& c) {
  const VectorFieldSpec v = c.field();
  const Vec3 p = c.point();
  const Frame f = frame_at(v, p, c.frame());
  auto& r = c.report;
  r.columns = {"x", "y", "z"};
  for (const char* b : {"t", "n", "b", "curl_t"}) add_cols(r.columns, vec_cols(b));
  add_cols(r.columns, {"speed", "normal_magnitude"});
  std::vector<Json> row;
  append_vec(row, p);
  for (const Vec3& w : {f.t, f.n, f.b, f.curl_t}) append_vec(row, w);
  row.push_back(cell(f.speed));
  row.push_back(cell(f.normal_magnitude));
  r.rows.push_back(std::move(row));
  const double ortho = std::max({std::abs(norm(f.t) - 1.0), std::abs(norm(f.n) - 1.0), std::abs(norm(f.b) - 1.0),
                                 std::abs(dot(f.t, f.n)), std::abs(dot(f.t, f.b)), std::abs(dot(f.n, f.b))});
  r.summary["orthonormality_error"] = cell(ortho);
  r.summary["handedness_error"] = cell(norm(cross(f.t, f.n) - f.b));
}

inline std::vector<Vec3> halton_points(const Options& o) {
  const auto b = parse_numbers(o.box, 6, "--box");
  const Vec3 lo{b[0], b[2], b[4]}, hi{b[1], b[3], b[5]};
  for (std::size_t i = 0; i < 3; ++i)
    if (!(lo[i] < hi[i])) throw UsageError("--box needs min < max on every axis");
  std::vector<Vec3> pts;
  for (std::size_t k = 0; k < o.samples; ++k) pts.push_back(halton_point(k, lo, hi));
  return pts;
}

inline void cmd_helicity(Context& c) {
  const VectorFieldSpec v = c.field();
  auto& r = c.report;
  r.columns = {"x", "y", "z", "omega_t", "omega_n", "omega_b", "n_curl_b", "b_curl_n", "omega_nb"};
  auto emit = [&](const Vec3& p, const HelicityDensities& h) {
    std::vector<Json> row;
    append_vec(row, p);
    for (double d : {h.omega_t, h.omega_n, h.omega_b, h.n_curl_b, h.b_curl_n, h.omega_nb()}) row.push_back(cell(d));
    r.rows.push_back(std::move(row));
  };
  if (!c.o.point.empty()) {
    const Vec3 p = c.point();
    emit(p, helicities_at(v, p, c.frame()));
    return;
  }
  r.input["box"] = c.o.box;
  std::size_t skipped = 0;
  for (const Vec3& p : halton_points(c.o)) {
    try {
      emit(p, helicities_at(v, p, c.frame()));
    } catch (const DegeneracyError&) {
      ++skipped;
    }
  }
  r.summary["points"] = r.rows.size();
  r.summary["skipped_degenerate"] = skipped;
}

inline void cmd_streamline(Context& c) {
  const VectorFieldSpec v = c.field();
  const Vec3 seed = c.seed();
  const Streamline line = integrate_streamline(v, seed, c.o.smax, c.riccati());
  auto& r = c.report;
  r.columns = {"s", "x", "y", "z"};
  for (const char* b : {"t", "n", "b"}) add_cols(r.columns, vec_cols(b));
  add_cols(r.columns, {"speed", "speed_log_deriv", "omega_t", "omega_n", "omega_b", "omega_nb"});
  for (const auto& smp : line.samples) {
    std::vector<Json> row{cell(smp.s)};
    append_vec(row, smp.x);
    const auto& g = smp.geometry;
    for (const Vec3& w : {g.frame.t, g.frame.n, g.frame.b}) append_vec(row, w);
    for (double d : {g.frame.speed, g.speed_log_deriv, g.helicities.omega_t, g.helicities.omega_n,
                     g.helicities.omega_b, g.helicities.omega_nb()})
      row.push_back(cell(d));
    r.rows.push_back(std::move(row));
  }
  r.summary["samples"] = line.samples.size();
  r.summary["s_end"] = cell(line.samples.back().s);
  r.summary["end_point"] = vec_json(line.samples.back().x);
  r.summary["distance_to_seed"] = cell(norm(line.samples.back().x - seed));
}

inline Json coordinate_cell(const ProjectiveMu& m, Chart c) {
  const double w = m.coordinate(c);
  return cell(w);
}

inline void cmd_riccati(Context& c) {
  const VectorFieldSpec v = c.field();
  const Vec3 seed = c.seed();
  auto& r = c.report;
  RiccatiOptions ro = c.riccati();

  if (c.o.linear) {
    LinearOptions lo;
    lo.riccati = ro;
    lo.omega_b_floor = c.o.omega_b_floor;
    lo.eps_u = c.o.eps_u;
    r.input["u0"] = c.o.u0;
    r.input["du0"] = c.o.du0;
    const LinearTrack t = integrate_linear_pair(v, seed, c.o.u0, c.o.du0, c.o.smax, lo);
    r.columns = {"s", "x", "y", "z", "u", "du", "mu_reconstructed", "u_zero_crossing", "omega_b", "d_omega_b"};
    std::size_t crossings = 0;
    for (std::size_t i = 0; i < t.u.size(); ++i) {
      const auto& smp = t.streamline.samples[i];
      std::vector<Json> row{cell(smp.s)};
      append_vec(row, smp.x);
      row.push_back(cell(t.u[i]));
      row.push_back(cell(t.du[i]));
      row.push_back(cell(t.mu_reconstructed[i]));
      row.push_back(Json(bool(t.u_zero_crossing[i])));
      row.push_back(cell(smp.geometry.helicities.omega_b));
      row.push_back(cell(t.d_omega_b[i]));
      crossings += t.u_zero_crossing[i] ? 1 : 0;
      r.rows.push_back(std::move(row));
    }
    r.summary["samples"] = t.u.size();
    r.summary["u_zero_crossings"] = crossings;
    return;
  }

  std::vector<double> mu0 = c.o.mu0.empty() ? std::vector<double>{0.0} : c.o.mu0;
  std::vector<ProjectiveMu> init;
  for (double m : mu0) init.push_back(ProjectiveMu::from_mu(m));
  const auto tracks = integrate_riccati_bundle(v, seed, init, c.o.smax, ro);
  r.columns = {"s", "x", "y", "z"};
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    const std::string n = std::to_string(k + 1);
    add_cols(r.columns, {"mu_" + n, "eta_" + n, "chart_" + n, "p_" + n, "q_" + n});
  }
  const auto& samples = tracks.front().streamline.samples;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<Json> row{cell(samples[i].s)};
    append_vec(row, samples[i].x);
    for (const auto& t : tracks) {
      const ProjectiveMu& m = t.mu_states[i];
      row.push_back(coordinate_cell(m, Chart::Mu));
      row.push_back(coordinate_cell(m, Chart::Eta));
      row.push_back(std::string(to_string(m.chart)));
      row.push_back(cell(m.p));
      row.push_back(cell(m.q));
    }
    r.rows.push_back(std::move(row));
  }
  Json per = Json::array();
  double worst = 0.0;
  for (std::size_t k = 0; k < tracks.size(); ++k) {
    const auto res = riccati_residual(tracks[k]);
    worst = std::max(worst, res.max_abs);
    const ProjectiveMu& last = tracks[k].mu_states.back();
    per.push_back(Json{{"mu0", mu0[k]},
                       {"chart_switches", tracks[k].chart_switches},
                       {"riccati_residual_max", cell(res.max_abs)},
                       {"riccati_residual_ratio", cell(res.worst_ratio)},
                       {"final_mu", coordinate_cell(last, Chart::Mu)},
                       {"final_eta", coordinate_cell(last, Chart::Eta)},
                       {"final_chart", std::string(to_string(last.chart))}});
  }
  r.summary["tracks"] = per;
  r.summary["riccati_residual_max"] = cell(worst);
  r.summary["samples"] = samples.size();
  if (tracks.size() == 4) r.summary["cross_ratio_drift"] = cell(cross_ratio_drift(tracks));
}

inline void cmd_construct(Context& c) {
  const VectorFieldSpec v = c.field();
  const Vec3 seed = c.seed();
  ConstructOptions co;
  co.riccati = c.riccati();
  co.eps_omega = c.o.eps_omega;
  co.alpha0 = c.o.alpha0;
  if (c.o.mu0.size() > 2) throw UsageError("construct takes at most two --mu0 values");
  if (c.o.mu0.size() >= 1) co.mu0_1 = c.o.mu0[0];
  if (c.o.mu0.size() == 2) co.mu0_2 = c.o.mu0[1];
  const BiHamiltonianResult res = construct_bihamiltonian(v, seed, c.o.smax, co);

  auto& r = c.report;
  r.columns = {"s", "x", "y", "z"};
  for (const char* k : {"1", "2"}) {
    const std::string n = k;
    add_cols(r.columns, {"chart_" + n, "coordinate_" + n, "alpha_" + n, "J" + n + "_x", "J" + n + "_y", "J" + n + "_z"});
  }
  add_cols(r.columns, {"omega_n", "omega_b", "omega_nb", "compat_residual"});
  const auto& samples = res.track1.base.streamline.samples;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::vector<Json> row{cell(samples[i].s)};
    append_vec(row, samples[i].x);
    for (const PoissonTrack* t : {&res.track1, &res.track2}) {
      const ProjectiveMu& m = t->base.mu_states[i];
      row.push_back(std::string(to_string(m.chart)));
      row.push_back(cell(m.coordinate()));
      row.push_back(cell(t->base.alpha[i]));
      append_vec(row, t->j[i]);
    }
    const auto& h = samples[i].geometry.helicities;
    row.push_back(cell(h.omega_n));
    row.push_back(cell(h.omega_b));
    row.push_back(cell(h.omega_nb()));
    row.push_back(cell(res.compat.residual[i]));
    r.rows.push_back(std::move(row));
  }
  auto& s = r.summary;
  s["case_tag"] = std::string(to_string(res.case_tag));
  s["ambiguous_case"] = res.ambiguous;
  s["max_omega_n"] = cell(res.max_omega_n);
  s["max_omega_b"] = cell(res.max_omega_b);
  s["max_omega_nb"] = cell(res.max_omega_nb);
  s["compat_form"] = res.compat.form;
  s["compat_residual_max"] = cell(res.compat_residual_max);
  s["track_kinds"] = {std::string(to_string(res.track1.kind)), std::string(to_string(res.track2.kind))};
  s["chart_switches"] = {res.track1.base.chart_switches, res.track2.base.chart_switches};
  if (res.riccati1) s["riccati_residual_max_1"] = cell(res.riccati1->max_abs);
  if (res.riccati2) s["riccati_residual_max_2"] = cell(res.riccati2->max_abs);
  double jt = 0.0;
  for (const PoissonTrack* t : {&res.track1, &res.track2})
    for (std::size_t i = 0; i < samples.size(); ++i)
      jt = std::max(jt, std::abs(dot(t->j[i], samples[i].geometry.frame.t)));
  s["max_j_dot_t"] = cell(jt);
  s["samples"] = samples.size();
}

inline void cmd_verify(Context& c) {
  const VectorFieldSpec v = c.field();
  auto& r = c.report;
  std::optional<ExprAst> h1, h2;
  std::optional<VectorFieldSpec> j1, j2;
  if (const auto* e = c.entry()) {
    if (e->known_hamiltonians) {
      h1 = e->known_hamiltonians->first;
      h2 = e->known_hamiltonians->second;
    }
    if (e->known_poisson) {
      j1 = e->known_poisson->first;
      j2 = e->known_poisson->second;
    }
  }
  if (c.o.h1.empty() != c.o.h2.empty()) throw UsageError("--h1 and --h2 go together");
  if (!c.o.h1.empty()) {
    h1 = parse_scalar(c.o.h1);
    h2 = parse_scalar(c.o.h2);
  }
  if (c.o.poisson.size() > 2) throw UsageError("at most two --poisson fields");
  if (!c.o.poisson.empty()) {
    j1 = parse_vector(c.o.poisson[0]);
    j2.reset();
    if (c.o.poisson.size() == 2) j2 = parse_vector(c.o.poisson[1]);
  }
  if (!h1 && !j1) throw UsageError("verify needs Hamiltonians (--h1/--h2) or Poisson vectors (--poisson)");
  // Without explicit Poisson vectors the pair J1 = ∇H1, J2 = −∇H2 is checked.
  if (h1 && !j1) {
    j1 = gradient_field(*h1);
    j2 = gradient_field(ExprAst(ast::negate(h2->root_ptr())));
  }
  if (h1) r.input["hamiltonians"] = {h1->to_string(), h2->to_string()};
  r.input["poisson"] = Json::array();
  for (const auto* j : {&j1, &j2})
    if (*j) r.input["poisson"].push_back((*j)->to_string());
  r.input["box"] = c.o.box;

  r.columns = {"x", "y", "z", "hamilton_1", "hamilton_2", "j_dot_v", "grad_h_dot_v",
               "jacobi_1", "jacobi_2", "compatibility", "psi", "nambu"};
  const FrameOptions fo = c.frame();
  std::size_t skipped = 0;
  double max_ham = 0.0, max_jv = 0.0, max_hv = 0.0, max_jac = 0.0, max_comp = 0.0, max_nambu = 0.0;
  double psi_min = std::numeric_limits<double>::infinity(), psi_max = -psi_min;
  const Json null_cell = nullptr;
  for (const Vec3& p : halton_points(c.o)) {
    const Vec3 vp = evaluate(v, p);
    if (!(norm(vp) >= fo.eps_v(p))) {
      ++skipped;
      continue;
    }
    if (h1 && !(norm(cross(gradient(ScalarField(*h1), p), gradient(ScalarField(*h2), p))) >= fo.eps_deg)) {
      ++skipped;
      continue;
    }
    std::vector<Json> row;
    append_vec(row, p);
    const VectorField vj1 = *j1;
    if (h1) {
      const auto a = hamilton_residual(vj1, *h2, v, p);
      const double ha = norm(a.vec_residual);
      double hb = std::numeric_limits<double>::quiet_NaN();
      double jv = std::abs(a.j_dot_v);
      if (j2) {
        const auto b = hamilton_residual(VectorField(*j2), *h1, v, p);
        hb = norm(b.vec_residual);
        jv = std::max(jv, std::abs(b.j_dot_v));
        max_ham = std::max(max_ham, hb);
      }
      const double hv = std::max(std::abs(a.grad_h_dot_v), std::abs(dot(gradient(ScalarField(*h1), p), vp)));
      max_ham = std::max(max_ham, ha);
      max_jv = std::max(max_jv, jv);
      max_hv = std::max(max_hv, hv);
      row.push_back(cell(ha));
      row.push_back(cell(hb));
      row.push_back(cell(jv));
      row.push_back(cell(hv));
    } else {
      double jv = std::abs(dot(value(vj1, p), vp));
      if (j2) jv = std::max(jv, std::abs(dot(evaluate(*j2, p), vp)));
      max_jv = std::max(max_jv, jv);
      row.insert(row.end(), {null_cell, null_cell, cell(jv), null_cell});
    }
    const double jac1 = jacobi_residual(vj1, p);
    max_jac = std::max(max_jac, std::abs(jac1));
    row.push_back(cell(jac1));
    if (j2) {
      const double jac2 = jacobi_residual(VectorField(*j2), p);
      const double comp = compatibility_residual(vj1, VectorField(*j2), p);
      max_jac = std::max(max_jac, std::abs(jac2));
      max_comp = std::max(max_comp, std::abs(comp));
      row.push_back(cell(jac2));
      row.push_back(cell(comp));
    } else {
      row.insert(row.end(), {null_cell, null_cell});
    }
    if (h1) {
      const auto nr = nambu_residual(v, *h1, *h2, p);
      psi_min = std::min(psi_min, nr.psi);
      psi_max = std::max(psi_max, nr.psi);
      max_nambu = std::max(max_nambu, nr.residual);
      row.push_back(cell(nr.psi));
      row.push_back(cell(nr.residual));
    } else {
      row.insert(row.end(), {null_cell, null_cell});
    }
    r.rows.push_back(std::move(row));
  }
  auto& s = r.summary;
  s["points"] = r.rows.size();
  s["skipped_degenerate"] = skipped;
  s["max_jacobi_residual"] = cell(max_jac);
  s["max_j_dot_v"] = cell(max_jv);
  s["max_compatibility_residual"] = cell(max_comp);
  if (h1) {
    s["max_hamilton_residual"] = cell(max_ham);
    s["max_grad_h_dot_v"] = cell(max_hv);
    s["max_nambu_residual"] = cell(max_nambu);
    s["psi_min"] = cell(psi_min);
    s["psi_max"] = cell(psi_max);
  }
}

inline void cmd_catalog(Context& c) {
  auto& r = c.report;
  if (!c.o.catalog.empty()) r.input["catalog"] = c.o.catalog;
  r.columns = {"name", "field", "hamiltonians", "poisson", "seed_x", "seed_y", "seed_z", "notes"};
  std::vector<const CatalogEntry*> list;
  if (const auto* e = c.entry()) {
    list.push_back(e);
  } else {
    for (const auto& e2 : c.cat().entries()) list.push_back(&e2);
  }
  for (const auto* e : list) {
    const Json j = entry_to_json(*e);
    std::vector<Json> row{e->name, j["field"]};
    row.push_back(j.contains("hamiltonians") ? Json(j["hamiltonians"][0].get<std::string>() + "; " +
                                                    j["hamiltonians"][1].get<std::string>())
                                              : Json(nullptr));
    row.push_back(j.contains("poisson")
                      ? Json(j["poisson"][0].get<std::string>() + "; " + j["poisson"][1].get<std::string>())
                      : Json(nullptr));
    append_vec(row, e->recommended_seed);
    row.push_back(e->notes);
    r.rows.push_back(std::move(row));
  }
  r.summary["systems"] = r.rows.size();
}

inline void write_report(const Report& r, const Options& o, std::ostream& out) {
  const std::string text = o.format == "csv" ? emit_csv(r) : emit_json(r);
  if (o.output.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.output, std::ios::binary);
  if (!f) throw Error("cannot write '" + o.output + "'");
  f << text;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Bi-Hamiltonian structures of 3D vector fields from the Serret-Frenet frame", "bihamil"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));
  app.footer(std::string(kGrammar));

  auto common = [&](CLI::App* s) {
    s->add_option("--field", o.field, "vector field \"fx,fy,fz\" in the DSL");
    s->add_option("--system", o.system, "catalog system name");
    s->add_option("--catalog", o.catalog, "JSON file with extra catalog entries");
    s->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--output", o.output, "write the report to PATH instead of stdout");
    s->add_option("--fd-step", o.fd_step, "central-difference step for frame curls (0: automatic)");
    s->add_option("--eps-v", o.eps_v, "zero-velocity threshold scale, eps_v = value*(1+|p|)");
    s->add_option("--eps-deg", o.eps_deg, "threshold on |t x curl t|");
    s->footer(std::string(kGrammar));
  };
  auto tracking = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "streamline seed X,Y,Z");
    s->add_option("--smax", o.smax, "arclength to integrate");
    s->add_option("--tol", o.tol, "integrator relative and absolute tolerance");
    s->add_option("--sample-step", o.sample_step, "arclength spacing of reported samples");
    s->add_option("--max-step", o.max_step, "largest integrator step (0: smax/20)");
    s->add_option("--chart-switch", o.chart_switch, "switch charts when |mu| or |eta| exceeds this");
    s->add_flag("--backward", o.backward, "integrate towards negative arclength");
  };

  auto* frame = app.add_subcommand("frame", "Serret-Frenet frame at a point");
  common(frame);
  frame->add_option("--point", o.point, "X,Y,Z");

  auto* helicity = app.add_subcommand("helicity", "helicity densities at a point or over a box");
  common(helicity);
  helicity->add_option("--point", o.point, "X,Y,Z (omit to sample --box)");
  helicity->add_option("--box", o.box, "xmin,xmax,ymin,ymax,zmin,zmax");
  helicity->add_option("--samples", o.samples, "number of Halton points");

  auto* streamline = app.add_subcommand("streamline", "streamline with frame and helicities");
  common(streamline);
  tracking(streamline);

  auto* riccati = app.add_subcommand("riccati", "Riccati solutions along a streamline");
  common(riccati);
  tracking(riccati);
  riccati->add_option("--mu0", o.mu0, "initial mu (repeatable)")->allow_extra_args(false);
  riccati->add_flag("--linear", o.linear, "solve the linear second-order form instead");
  riccati->add_option("--u0", o.u0, "linear form: u(0)");
  riccati->add_option("--du0", o.du0, "linear form: u'(0)");
  riccati->add_option("--omega-b-floor", o.omega_b_floor, "linear form: smallest admissible |Omega_b|");
  riccati->add_option("--eps-u", o.eps_u, "linear form: |u| below which mu is not reconstructed");

  auto* construct = app.add_subcommand("construct", "compatible Poisson pair along a streamline");
  common(construct);
  tracking(construct);
  construct->add_option("--mu0", o.mu0, "initial mu of the two Riccati tracks (up to two)")->allow_extra_args(false);
  construct->add_option("--alpha0", o.alpha0, "initial scale of the Poisson vectors");
  construct->add_option("--eps-omega", o.eps_omega, "threshold below which a helicity counts as zero");

  auto* verify = app.add_subcommand("verify", "residuals of analytic Hamiltonians / Poisson vectors");
  common(verify);
  verify->add_option("--h1", o.h1, "first Hamiltonian");
  verify->add_option("--h2", o.h2, "second Hamiltonian");
  verify->add_option("--poisson", o.poisson, "Poisson vector \"jx,jy,jz\" (repeatable, up to two)")
      ->allow_extra_args(false);
  verify->add_option("--box", o.box, "xmin,xmax,ymin,ymax,zmin,zmax");
  verify->add_option("--samples", o.samples, "number of Halton points");

  auto* catalog = app.add_subcommand("catalog", "list catalog systems");
  catalog->add_option("--system", o.system, "show one system");
  catalog->add_option("--catalog", o.catalog, "JSON file with extra catalog entries");
  catalog->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json", "csv"}));
  catalog->add_option("--output", o.output, "write the report to PATH instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return 1;
  }

  Report report;
  for (int i = 1; i < argc; ++i) report.argv.emplace_back(argv[i]);
  report.generated_at = utc_timestamp();
  report.options = detail::options_json(o);
  detail::Context ctx{o, report, std::nullopt};

  try {
    detail::check_options(o);
    if (*frame) {
      report.command = "frame";
      detail::cmd_frame(ctx);
    } else if (*helicity) {
      report.command = "helicity";
      detail::cmd_helicity(ctx);
    } else if (*streamline) {
      report.command = "streamline";
      detail::cmd_streamline(ctx);
    } else if (*riccati) {
      report.command = "riccati";
      detail::cmd_riccati(ctx);
    } else if (*construct) {
      report.command = "construct";
      detail::cmd_construct(ctx);
    } else if (*verify) {
      report.command = "verify";
      detail::cmd_verify(ctx);
    } else {
      report.command = "catalog";
      detail::cmd_catalog(ctx);
    }
    report.summary["status"] = "ok";
    detail::write_report(report, o, out);
    return 0;
  } catch (const AbortedError& e) {
    report.rows.clear();
    report.summary = Json{{"status", "aborted"}, {"error", e.what()}};
    if (const auto* d = dynamic_cast<const DegeneracyError*>(&e)) {
      const auto& rep = d->report();
      report.summary["degeneracy"] = Json{{"kind", std::string(to_string(rep.kind))},
                                          {"magnitude", cell(rep.magnitude)},
                                          {"threshold", cell(rep.threshold)}};
    }
    if (const auto* d = dynamic_cast<const DegenerateFrameEncountered*>(&e)) report.summary["s"] = cell(d->s());
    if (const auto* d = dynamic_cast<const OmegaBTooSmall*>(&e)) report.summary["s"] = cell(d->s());
    err << "bihamil: " << e.what() << "\n";
    try {
      detail::write_report(report, o, out);
    } catch (const std::exception& w) {
      err << "bihamil: " << w.what() << "\n";
    }
    return 2;
  } catch (const UsageError& e) {
    err << "bihamil: " << e.what() << "\n\n" << app.help() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "bihamil: " << e.what() << "\n\n" << kGrammar;
    return 1;
  } catch (const std::exception& e) {
    err << "bihamil: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace bihamil::cli
