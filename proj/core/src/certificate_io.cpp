#include "polysafe/certificate_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "polysafe/error.hpp"
#include "polysafe/parser.hpp"

namespace polysafe {

namespace {

using json = nlohmann::ordered_json;

json names(const Variables& vars) {
  json out = json::array();
  for (const Variable& v : vars) out.push_back(v.name());
  return out;
}

json matrix(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json trace_json(const AlternationTrace& trace) {
  json out = json::array();
  for (const TraceRecord& r : trace.records) {
    json rec;
    rec["round"] = r.round;
    rec["phase"] = std::string(to_string(r.phase));
    rec["level"] = r.level;
    // NaN marks a failed phase; JSON has no NaN.
    if (std::isfinite(r.value)) {
      rec["value"] = r.value;
    } else {
      rec["value"] = nullptr;
    }
    rec["status"] = std::string(to_string(r.status));
    rec["iterations"] = r.iterations;
    rec["accepted"] = r.accepted;
    out.push_back(std::move(rec));
  }
  return out;
}

const json& field(const json& doc, const char* key) {
  if (!doc.contains(key)) throw SchemaError(std::string("certificate: missing field '") + key + "'");
  return doc.at(key);
}

Variables read_vars(const json& doc, const char* key, VarKind kind) {
  Variables out;
  if (!doc.contains(key)) return out;
  for (const auto& n : doc.at(key)) out.emplace_back(n.get<std::string>(), kind);
  return out;
}

Polynomial read_poly(const json& v, const std::string& path, const Variables& universe) {
  if (v.is_number()) return Polynomial(v.get<double>());
  if (!v.is_string()) throw SchemaError(path + ": expected a polynomial string");
  try {
    return parse_poly(v.get<std::string>(), universe);
  } catch (const UnknownIdentifierError& e) {
    throw UnknownIdentifierError(e.token(), e.offset(), path);
  }
}

Eigen::MatrixXd read_matrix(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path + ": expected an array of rows");
  const auto n = static_cast<Eigen::Index>(v.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw SchemaError(path + ": matrix must be square");
    }
    for (Eigen::Index j = 0; j < n; ++j) M(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return M;
}

template <typename E>
E enum_from(const std::string& s, std::initializer_list<E> values, const std::string& path) {
  for (E e : values) {
    if (to_string(e) == s) return e;
  }
  throw SchemaError(path + ": unknown value '" + s + "'");
}

}  // namespace

std::string trace_to_json(const AlternationTrace& trace) { return trace_json(trace).dump(); }

std::string certificate_to_json(const Certificate& cert, int indent) {
  json doc;
  doc["state_vars"] = names(cert.state_vars);
  doc["attack_vars"] = names(cert.attack_vars);
  doc["measurement_vars"] = names(cert.measurement_vars);
  doc["V"] = cert.V.to_string(0);
  doc["lambda1"] = cert.lambda1.to_string(0);
  doc["lambda2"] = cert.lambda2.to_string(0);
  doc["lambda3"] = cert.lambda3.to_string(0);
  doc["lambda4"] = cert.lambda4.to_string(0);
  if (cert.lambda5) doc["lambda5"] = cert.lambda5->to_string(0);
  if (cert.h_s) {
    if (cert.h_s->size() == 1) {
      doc["h_s"] = cert.h_s->front().to_string(0);
    } else {
      json arr = json::array();
      for (const auto& h : *cert.h_s) arr.push_back(h.to_string(0));
      doc["h_s"] = arr;
    }
  }
  if (cert.P) doc["P"] = matrix(*cert.P);
  doc["epsilon"] = cert.epsilon;
  doc["gamma"] = cert.gamma;
  doc["trace"] = trace_json(cert.trace);
  json grams = json::object();
  for (const auto& [name, g] : cert.grams) {
    json entry;
    json basis = json::array();
    for (const Monomial& m : g.basis) basis.push_back(m.to_string());
    entry["basis"] = basis;
    entry["Q"] = matrix(g.Q);
    entry["raw_defect"] = g.raw_defect;
    entry["defect"] = g.defect;
    entry["min_eigenvalue"] = g.min_eigenvalue;
    grams[name] = entry;
  }
  doc["grams"] = grams;
  return doc.dump(indent);
}

Certificate certificate_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("certificate: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("certificate must be a JSON object");
  try {
    Certificate c;
    c.state_vars = read_vars(doc, "state_vars", VarKind::kState);
    c.attack_vars = read_vars(doc, "attack_vars", VarKind::kAttack);
    c.measurement_vars = read_vars(doc, "measurement_vars", VarKind::kMeasurement);
    Variables xa = c.state_vars;
    xa.insert(xa.end(), c.attack_vars.begin(), c.attack_vars.end());
    c.V = read_poly(field(doc, "V"), "V", c.state_vars);
    const auto optional_poly = [&](const char* key, const Variables& universe) {
      return doc.contains(key) ? read_poly(doc.at(key), key, universe) : Polynomial();
    };
    c.lambda1 = optional_poly("lambda1", c.state_vars);
    c.lambda2 = optional_poly("lambda2", c.state_vars);
    c.lambda3 = optional_poly("lambda3", xa);
    c.lambda4 = optional_poly("lambda4", xa);
    if (doc.contains("lambda5")) c.lambda5 = read_poly(doc.at("lambda5"), "lambda5", c.state_vars);
    if (doc.contains("h_s")) {
      const json& h = doc.at("h_s");
      std::vector<Polynomial> hs;
      if (h.is_array()) {
        for (std::size_t j = 0; j < h.size(); ++j) {
          hs.push_back(read_poly(h[j], "h_s[" + std::to_string(j) + "]", c.measurement_vars));
        }
      } else {
        hs.push_back(read_poly(h, "h_s", c.measurement_vars));
      }
      c.h_s = hs;
    }
    if (doc.contains("P")) c.P = read_matrix(doc.at("P"), "P");
    c.epsilon = doc.value("epsilon", 0.0);
    c.gamma = doc.value("gamma", 0.0);
    if (doc.contains("trace")) {
      for (const json& r : doc.at("trace")) {
        TraceRecord rec;
        rec.round = r.value("round", 0);
        rec.phase = enum_from<Phase>(r.value("phase", "multiplier"),
                                     {Phase::kMultiplier, Phase::kV, Phase::kEllipsoidMultiplier,
                                      Phase::kEllipsoidV, Phase::kComplete},
                                     "trace.phase");
        rec.level = r.value("level", 0);
        rec.value = r.contains("value") && r.at("value").is_number()
                        ? r.at("value").get<double>()
                        : std::numeric_limits<double>::quiet_NaN();
        rec.status = enum_from<SdpStatus>(
            r.value("status", "optimal"),
            {SdpStatus::kOptimal, SdpStatus::kInfeasiblePrimal, SdpStatus::kInfeasibleDual,
             SdpStatus::kMaxIters, SdpStatus::kNumericalFailure},
            "trace.status");
        rec.iterations = r.value("iterations", 0);
        rec.accepted = r.value("accepted", true);
        c.trace.records.push_back(rec);
      }
    }
    if (doc.contains("grams")) {
      Variables all = xa;
      all.insert(all.end(), c.measurement_vars.begin(), c.measurement_vars.end());
      for (const auto& [name, entry] : doc.at("grams").items()) {
        GramDecomposition g;
        const std::string path = "grams." + name;
        for (const json& m : field(entry, "basis")) {
          const Polynomial p = read_poly(m, path + ".basis", all);
          if (p.size() != 1 || p.terms().begin()->second != 1.0) {
            throw SchemaError(path + ".basis: entries must be monomials");
          }
          g.basis.push_back(p.terms().begin()->first);
        }
        g.Q = read_matrix(field(entry, "Q"), path + ".Q");
        if (g.Q.rows() != static_cast<Eigen::Index>(g.basis.size())) {
          throw SchemaError(path + ": Q size does not match the basis");
        }
        g.raw_defect = entry.value("raw_defect", 0.0);
        g.defect = entry.value("defect", 0.0);
        g.min_eigenvalue = entry.value("min_eigenvalue", 0.0);
        c.grams.emplace(name, std::move(g));
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("certificate: ") + e.what());
  }
}

void save_certificate(const Certificate& cert, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write '" + file.string() + "'");
  out << certificate_to_json(cert) << "\n";
}

Certificate load_certificate(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot open '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return certificate_from_json(ss.str());
}

}  // namespace polysafe
