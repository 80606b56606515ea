#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mapfluct/errors.hpp"
#include "mapfluct/fluctuation.hpp"
#include "mapfluct/model.hpp"
#include "mapfluct/model_json.hpp"
#include "mapfluct/montecarlo.hpp"
#include "mapfluct/rng.hpp"
#include "mapfluct/simulate.hpp"
#include "mapfluct/spectral.hpp"
#include "mapfluct/verify.hpp"

namespace mapfluct::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitSuiteFailed = 3;

/// Parses "a", "bi", "a+bi" or "a-bi" (also "i" and "-i").
inline cplx parse_complex(const std::string& text) {
  std::string s;
  for (char ch : text)
    if (ch != ' ') s += ch;
  if (s.empty()) throw ParseError("empty complex literal");
  auto number = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      throw ParseError("malformed complex literal '" + text + "'");
    }
    if (used != t.size()) throw ParseError("malformed complex literal '" + text + "'");
    return v;
  };
  if (s.back() != 'i') return {number(s), 0.0};
  s.pop_back();
  std::size_t split = std::string::npos;
  for (std::size_t k = s.size(); k-- > 1;)
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      split = k;
      break;
    }
  auto imag = [&](const std::string& t) {
    if (t.empty() || t == "+") return 1.0;
    if (t == "-") return -1.0;
    return number(t);
  };
  if (split == std::string::npos) return {0.0, imag(s)};
  return {number(s.substr(0, split)), imag(s.substr(split))};
}

/// Comma-separated reals; a single value is broadcast to n entries.
inline RVector parse_vector(const std::string& text, int n) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ParseError("malformed vector '" + text + "'");
    }
    while (used < item.size() && item[used] == ' ') ++used;
    if (used != item.size()) throw ParseError("malformed vector '" + text + "'");
    v.push_back(x);
  }
  if (v.size() == 1) return RVector::Constant(n, v[0]);
  if (static_cast<int>(v.size()) != n)
    throw ValidationError("vector '" + text + "' needs " + std::to_string(n) + " entries");
  return Eigen::Map<RVector>(v.data(), n);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// Inverse of parse_complex.
inline std::string complex_literal(cplx z) {
  std::string im = num(std::abs(z.imag()));
  return num(z.real()) + (std::signbit(z.imag()) ? "-" : "+") + im + "i";
}

/// Output sink for named matrices, vectors and scalars in one of the three
/// formats.
class Emitter {
 public:
  explicit Emitter(std::string format) : format_(std::move(format)) {}

  void scalar(const std::string& name, double v) {
    ++objects_;
    json_[name] = v;
    rows_.push_back({name, "", "", num(v), ""});
    table_ << name << " = " << std::setprecision(10) << v << "\n";
  }

  void count(const std::string& name, std::uint64_t v) {
    ++objects_;
    json_[name] = v;
    rows_.push_back({name, "", "", std::to_string(v), ""});
    table_ << name << " = " << v << "\n";
  }

  void text(const std::string& name, const std::string& v) {
    ++objects_;
    json_[name] = v;
    rows_.push_back({name, "", "", v, ""});
    table_ << name << " = " << v << "\n";
  }

  void vector(const std::string& name, const RVector& v) {
    ++objects_;
    nlohmann::json a = nlohmann::json::array();
    table_ << name << " =";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      a.push_back(v(i));
      rows_.push_back({name, std::to_string(i), "", num(v(i)), ""});
      table_ << " " << std::setw(16) << std::setprecision(10) << v(i);
    }
    table_ << "\n";
    json_[name] = a;
  }

  void matrix(const std::string& name, const CMatrix& m, bool complex_values) {
    ++objects_;
    grid_ = m;
    grid_complex_ = complex_values;
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    table_ << name << " =\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      nlohmann::json rr = nlohmann::json::array(), ri = nlohmann::json::array();
      table_ << " ";
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        rr.push_back(m(i, j).real());
        ri.push_back(m(i, j).imag());
        rows_.push_back({name, std::to_string(i), std::to_string(j), num(m(i, j).real()),
                         complex_values ? num(m(i, j).imag()) : ""});
        table_ << " " << std::setw(16) << std::setprecision(10) << m(i, j).real();
        if (complex_values) table_ << (m(i, j).imag() < 0 ? " - " : " + ") << std::setw(12) << std::abs(m(i, j).imag()) << "i";
      }
      table_ << "\n";
      re.push_back(rr);
      im.push_back(ri);
    }
    if (complex_values) json_[name] = {{"re", re}, {"im", im}};
    else json_[name] = re;
    complex_ = complex_ || complex_values;
  }

  void matrix(const std::string& name, const RMatrix& m) { matrix(name, CMatrix(m.cast<cplx>()), false); }

  std::string str() const {
    if (format_ == "json") return json_.dump(2) + "\n";
    if (format_ == "csv" && objects_ == 1 && grid_.size() > 0) {
      // a lone matrix is written as a plain grid
      std::string out;
      for (Eigen::Index i = 0; i < grid_.rows(); ++i) {
        for (Eigen::Index j = 0; j < grid_.cols(); ++j) {
          if (j) out += ",";
          out += grid_complex_ ? complex_literal(grid_(i, j)) : num(grid_(i, j).real());
        }
        out += "\n";
      }
      return out;
    }
    if (format_ == "csv") {
      std::string out = complex_ ? "name,i,j,re,im\n" : "name,i,j,value\n";
      for (const auto& r : rows_) {
        out += csv_field(r[0]) + "," + r[1] + "," + r[2] + "," + csv_field(r[3]);
        if (complex_) out += "," + r[4];
        out += "\n";
      }
      return out;
    }
    return table_.str();
  }

 private:
  std::string format_;
  nlohmann::json json_ = nlohmann::json::object();
  std::vector<std::array<std::string, 5>> rows_;
  std::ostringstream table_;
  bool complex_ = false;
  int objects_ = 0;
  CMatrix grid_;
  bool grid_complex_ = false;
};

inline std::string report_string(const CheckReport& r, const std::string& format) {
  if (format == "json") return to_json(r).dump(2) + "\n";
  if (format == "csv") {
    std::string out = "suite,name,kind,expected,observed,se,score,tol,gating,pass\n";
    for (const auto& c : r.checks)
      out += csv_field(r.suite) + "," + csv_field(c.name) + "," + (c.statistical ? "z" : "residual") + "," + num(c.expected) +
             "," + num(c.observed) + "," + (c.statistical ? num(c.se) : "") + "," + num(c.score) + "," + num(c.tol) + "," +
             (c.gating ? "1" : "0") + "," + (c.pass ? "1" : "0") + "\n";
    return out;
  }
  return to_table(r);
}

struct Settings {
  std::string model_path;
  std::string out_path;
  std::string format;
  std::string emit_normalized;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::uint64_t n = 0;
  int threads = 1;
  std::string beta;
  std::string alpha = "0";
  bool derivative = false;
  std::string kind = "killing";
  std::string phase;
  double level = -1.0;
  std::string start = "0";
  std::string dump;
  std::string suite = "identities";
  std::string target = "killing";
  double z_max = 4.0;
  double t = 1.0;
  double a = 0.0;
  double x = 1.0;
  bool runtime = false;
};

namespace detail {

/// Phase given by name or by index.
inline int phase_ref(const MapModel& m, const std::string& text) {
  for (int i = 0; i < m.size(); ++i)
    if (m.levy[static_cast<std::size_t>(i)].name == text) return i;
  int i = -1;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (ec != std::errc() || end != text.data() + text.size()) throw ValidationError("unknown phase '" + text + "'");
  if (i < 0 || i >= m.size()) throw ValidationError("phase index " + text + " out of range");
  return i;
}

inline WhKind parse_kind(const std::string& s) {
  static const std::map<std::string, WhKind> kinds = {{"killing", WhKind::killing}, {"sup", WhKind::sup},
                                                      {"inf", WhKind::inf},         {"cond-up", WhKind::cond_up},
                                                      {"cond-down", WhKind::cond_down}};
  const auto it = kinds.find(s);
  if (it == kinds.end()) throw ValidationError("unknown factor kind '" + s + "'");
  return it->second;
}

inline McTarget parse_target(const std::string& s) {
  static const std::map<std::string, McTarget> targets = {
      {"killing", McTarget::killing}, {"sup", McTarget::sup},         {"inf", McTarget::inf},
      {"sigma", McTarget::sigma},     {"cond-up", McTarget::cond_up}, {"cond-down", McTarget::cond_down}};
  const auto it = targets.find(s);
  if (it == targets.end()) throw ValidationError("unknown Monte Carlo target '" + s + "'");
  return it->second;
}

inline std::vector<cplx> default_alphas(McTarget t) {
  switch (t) {
    case McTarget::killing: return {cplx(0.0, 0.5), cplx(0.0, 1.5)};
    case McTarget::sup: return {-1.0, cplx(0.0, 1.0)};
    case McTarget::inf: return {0.5, cplx(0.0, 1.0)};
    case McTarget::sigma: return {0.0};
    case McTarget::cond_up: return {-0.5, cplx(0.0, 1.0)};
    case McTarget::cond_down: return {0.5, cplx(0.0, 1.0)};
  }
  return {};
}

inline CheckReport run_suite(const MapModel& m, const Settings& s) {
  VerifyOptions o;
  o.seed = s.seed;
  if (s.n > 0) o.n = s.n;
  o.threads = s.threads;
  o.z_max = s.z_max;
  o.runtime = s.runtime;
  const int n = m.size();
  std::vector<RVector> betas = {RVector::Zero(n)};
  if (!s.beta.empty()) betas.push_back(parse_vector(s.beta, n));
  std::vector<cplx> alphas;
  if (s.alpha != "0") alphas.push_back(parse_complex(s.alpha));
  if (s.suite == "identities") return verify_identities(m, betas, o);
  if (s.suite != "factorization" && !s.seed_given) throw ValidationError("suite '" + s.suite + "' needs --seed");
  if (s.suite == "factorization") {
    if (alphas.empty()) alphas = {cplx(0.0, 0.1), cplx(0.0, 0.5), cplx(0.0, 1.0), cplx(0.0, 2.0), cplx(0.0, 3.0)};
    if (s.beta.empty()) betas.push_back(RVector::Constant(n, 0.2));
    return verify_factorization(m, alphas, betas, o);
  }
  if (s.suite == "mc") {
    const McTarget t = parse_target(s.target);
    if (alphas.empty()) alphas = default_alphas(t);
    if (t == McTarget::sigma) betas = {s.beta.empty() ? default_beta(n) : parse_vector(s.beta, n)};
    return verify_mc(m, t, alphas, betas, o);
  }
  if (s.suite == "splitting") return verify_splitting(m, o);
  if (s.suite == "timerev") {
    TimerevParams p;
    p.t = s.t;
    return verify_timerev(m, p, o);
  }
  if (s.suite == "reversal") {
    ReversalParams p;
    p.a = s.a;
    p.x = s.x;
    ReversalKind k = ReversalKind::inf;
    if (s.kind == "last") k = ReversalKind::last;
    else if (s.kind == "first") k = ReversalKind::first;
    else if (s.kind != "inf") throw ValidationError("reversal kind must be inf, last or first");
    return verify_reversal(m, k, p, o);
  }
  if (s.suite == "init-law") return verify_init_law(m, o);
  throw ValidationError("unknown suite '" + s.suite + "'");
}

}  // namespace detail

/// Entry point of the command-line tool. Writes the result to `out` (or the
/// --out file) and diagnostics to `err`; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fluctuation theory of Markov additive processes"};
  app.require_subcommand(1);
  app.footer(
      "Vectors are comma-separated (a single value is broadcast), e.g. --beta 0.3,0.7.\n"
      "Complex numbers are written re+imi, e.g. --alpha 0.5, --alpha 1.5i, --alpha -1+2i.");
  Settings s;
  auto common = [&](CLI::App* sub, bool random) {
    sub->add_option("--model", s.model_path, "model JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", s.out_path, "write the result to this file");
    sub->add_option("--format", s.format, random ? "output format (default table)" : "output format (default csv)")->check(CLI::IsMember({"table", "csv", "json"}));
    sub->add_option("--emit-normalized", s.emit_normalized, "write the normalized model JSON to this file");
    if (random) {
      sub->add_option("--seed", s.seed, "64-bit seed (optional for the identities and factorization suites)");
      sub->add_option("--n", s.n, "number of paths (per start phase for suites)");
      sub->add_option("--threads", s.threads, "worker threads")->check(CLI::PositiveNumber);
    }
  };
  auto* psi_cmd = app.add_subcommand("psi", "matrix exponent Psi^beta(alpha)");
  common(psi_cmd, false);
  psi_cmd->add_option("--alpha", s.alpha, "complex argument");
  psi_cmd->add_option("--beta", s.beta, "extra killing vector");
  psi_cmd->add_flag("--derivative", s.derivative, "entrywise derivative in alpha");

  auto* fund_cmd = app.add_subcommand("fundamental", "roots and fundamental matrices G, R, H");
  common(fund_cmd, false);
  fund_cmd->add_option("--beta", s.beta, "extra killing vector");

  auto* wh_cmd = app.add_subcommand("wh", "Wiener-Hopf factor");
  common(wh_cmd, false);
  wh_cmd->add_option("--kind", s.kind, "killing, sup, inf, cond-up or cond-down");
  wh_cmd->add_option("--alpha", s.alpha, "complex argument");
  wh_cmd->add_option("--beta", s.beta, "extra killing vector");

  auto* le_cmd = app.add_subcommand("last-exit", "transform of occupation times at the last exit from (-inf, 0]");
  common(le_cmd, false);
  le_cmd->add_option("--beta", s.beta, "occupation weights")->required();

  auto* il_cmd = app.add_subcommand("init-law", "initial law of the process conditioned to stay non-positive");
  common(il_cmd, false);
  il_cmd->add_option("--phase", s.phase, "UP phase, by name or index")->required();
  il_cmd->add_option("--x", s.level, "negative level");

  auto* sim_cmd = app.add_subcommand("simulate", "simulate paths and summarize them");
  common(sim_cmd, true);
  sim_cmd->add_option("--start", s.start, "start phase, by name or index");
  sim_cmd->add_option("--dump", s.dump, "write the paths as CSV to this file");

  auto* ver_cmd = app.add_subcommand("verify", "run a verification suite");
  common(ver_cmd, true);
  ver_cmd->add_option("--suite", s.suite, "identities, factorization, mc, splitting, timerev, reversal or init-law");
  ver_cmd->add_option("--target", s.target, "mc target: killing, sup, inf, sigma, cond-up or cond-down");
  ver_cmd->add_option("--kind", s.kind, "reversal kind: inf, last or first");
  ver_cmd->add_option("--alpha", s.alpha, "complex argument");
  ver_cmd->add_option("--beta", s.beta, "extra killing vector");
  ver_cmd->add_option("--z-max", s.z_max, "z-score threshold");
  ver_cmd->add_option("--t", s.t, "fixed time for timerev");
  ver_cmd->add_option("--a", s.a, "last exit level");
  ver_cmd->add_option("--x", s.x, "first passage level");
  ver_cmd->add_flag("--runtime", s.runtime, "include the runtime in the report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInvalid;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string verb = sub->get_name();
  const CLI::Option* seed_opt = sub->get_option_no_throw("--seed");
  s.seed_given = seed_opt != nullptr && seed_opt->count() > 0;
  if (s.format.empty()) s.format = verb == "verify" ? "table" : "csv";
  int status = kExitOk;
  std::string result;
  try {
    const MapModel m = load_model(s.model_path);
    const int n = m.size();
    if (!s.emit_normalized.empty()) {
      std::ofstream f(s.emit_normalized);
      if (!f) throw ValidationError("cannot write '" + s.emit_normalized + "'");
      f << model_to_json(m).dump(2) << "\n";
    }
    const RVector beta = s.beta.empty() ? RVector(RVector::Zero(n)) : parse_vector(s.beta, n);
    Emitter e(s.format);
    if (verb == "psi") {
      const cplx a = parse_complex(s.alpha);
      e.matrix(s.derivative ? "dpsi" : "psi", psi(m, a, beta, s.derivative), true);
      result = e.str();
    } else if (verb == "fundamental") {
      const FundamentalSet f = fundamental(m, beta);
      RMatrix roots(f.root_data.roots.size(), 2);
      for (Eigen::Index k = 0; k < roots.rows(); ++k) roots.row(k) << f.root_data.roots(k).real(), f.root_data.roots(k).imag();
      e.vector("pi", f.pi);
      e.matrix("roots", roots);
      e.matrix("G", f.G);
      e.matrix("R", f.R);
      e.matrix("H", f.H);
      result = e.str();
    } else if (verb == "wh") {
      const FundamentalSet base = fundamental(m);
      const WhFactor w = wh_factor(base, detail::parse_kind(s.kind), parse_complex(s.alpha), beta);
      e.matrix(std::string("wh_") + to_string(w.kind), w.value, true);
      result = e.str();
    } else if (verb == "last-exit") {
      e.matrix("last_exit", last_exit_transform(m, beta));
      result = e.str();
    } else if (verb == "init-law") {
      const InitialLaw law = cond_down_initial_law(fundamental(m), detail::phase_ref(m, s.phase), s.level);
      e.vector("factor", law.factor);
      e.vector("density", law.density);
      e.scalar("c", law.c);
      e.scalar("atom", law.atom);
      result = e.str();
    } else if (verb == "simulate") {
      if (!s.seed_given) throw ValidationError("simulate needs --seed");
      if (s.n == 0) s.n = 1000;
      const int start = detail::phase_ref(m, s.start);
      const Simulator sim(m);
      std::ofstream dump;
      if (!s.dump.empty()) {
        dump.open(s.dump, std::ios::binary);
        if (!dump) throw ValidationError("cannot write '" + s.dump + "'");
        dump << std::setprecision(17) << "path_id,time,phase,value,event_kind\n";
      }
      double sum_zeta = 0.0, sq_zeta = 0.0, sum_x = 0.0;
      RVector end_phase = RVector::Zero(n), occ = RVector::Zero(n);
      Path p;
      for (std::uint64_t k = 0; k < s.n; ++k) {
        PhiloxStream rng(s.seed, stream_id(9, k));
        sim.run(rng, 0.0, start, p);
        const PathSummary ps = path_summary(p, n, 0.0, 1.0);
        sum_zeta += ps.zeta;
        sq_zeta += ps.zeta * ps.zeta;
        sum_x += ps.x_end;
        end_phase(ps.j_end) += 1.0;
        occ += ps.occ_zeta;
        if (dump) dump_path_csv(dump, k, p);
      }
      const double cnt = static_cast<double>(s.n);
      const double mean = sum_zeta / cnt;
      e.count("paths", s.n);
      e.scalar("mean_zeta", mean);
      e.scalar("se_zeta", std::sqrt(std::max(0.0, sq_zeta / cnt - mean * mean) / cnt));
      e.scalar("mean_x_end", sum_x / cnt);
      e.vector("mean_occupation", occ / cnt);
      e.vector("end_phase_frequency", end_phase / cnt);
      result = e.str();
    } else if (verb == "verify") {
      const CheckReport r = detail::run_suite(m, s);
      result = report_string(r, s.format);
      if (!r.pass) status = kExitSuiteFailed;
    }
  } catch (const ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const Error& ex) {
    err << "error (" << verb << "): " << ex.what() << "\n";
    return kExitError;
  }
  if (s.out_path.empty()) {
    out << result;
  } else {
    std::ofstream f(s.out_path, std::ios::binary);
    if (!f) {
      err << "error: cannot write '" << s.out_path << "'\n";
      return kExitInvalid;
    }
    f << result;
  }
  return status;
}

}  // namespace mapfluct::cli
