#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "optvalue/harness.hpp"
#include "optvalue/model.hpp"

namespace optvalue {

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
  DataError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what) {}
};

namespace io {

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Split one CSV line; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv(const std::string& line, std::size_t lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) throw DataError(lineno, "unterminated quoted field");
  fields.push_back(cur);
  return fields;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline double parse_double(const std::string& raw, std::size_t lineno, const char* field) {
  const std::string s = trim(raw);
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError(lineno, std::string("cannot parse ") + field + " value '" + s + "'");
  }
  if (pos != s.size()) {
    throw DataError(lineno, std::string("trailing characters in ") + field + " value '" + s + "'");
  }
  if (!std::isfinite(v)) throw DataError(lineno, std::string(field) + " value is not finite");
  return v;
}

inline long parse_long(const std::string& raw, std::size_t lineno, const char* field) {
  const std::string s = trim(raw);
  std::size_t pos = 0;
  long v;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw DataError(lineno, std::string("cannot parse ") + field + " value '" + s + "'");
  }
  if (pos != s.size()) {
    throw DataError(lineno, std::string("trailing characters in ") + field + " value '" + s + "'");
  }
  return v;
}

// does the token look like a bare integer (stratum label)?
inline bool integral_token(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty()) return false;
  std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
  if (i == s.size()) return false;
  for (; i < s.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  return true;
}

inline std::string read_line(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace io

// Reads observations from `w,a,y` CSV. The header line is required; the
// covariate column is treated as discrete when every value is a bare
// integer, continuous otherwise.
inline Dataset read_observations(std::istream& in) {
  std::size_t lineno = 1;
  const std::string header = io::read_line(in);
  if (!in && header.empty()) throw DataError("empty input, expected a 'w,a,y' header");
  {
    const auto cols = io::split_csv(header, lineno);
    if (cols.size() != 3 || io::trim(cols[0]) != "w" || io::trim(cols[1]) != "a" ||
        io::trim(cols[2]) != "y") {
      throw DataError(lineno, "expected header 'w,a,y', got '" + header + "'");
    }
  }
  std::vector<std::string> raw_w;
  std::vector<int> as;
  std::vector<double> ys;
  std::vector<std::size_t> linenos;
  while (in) {
    const std::string line = io::read_line(in);
    ++lineno;
    if (line.empty()) {
      if (!in) break;
      continue;
    }
    const auto cols = io::split_csv(line, lineno);
    if (cols.size() != 3) {
      throw DataError(lineno, "expected 3 fields, got " + std::to_string(cols.size()));
    }
    const long a = io::parse_long(cols[1], lineno, "a");
    if (a != 0 && a != 1) throw DataError(lineno, "a must be 0 or 1");
    raw_w.push_back(cols[0]);
    as.push_back(static_cast<int>(a));
    ys.push_back(io::parse_double(cols[2], lineno, "y"));
    linenos.push_back(lineno);
  }
  if (raw_w.empty()) throw DataError("no observations after the header");

  bool discrete = true;
  for (const std::string& s : raw_w) {
    if (!io::integral_token(s)) {
      discrete = false;
      break;
    }
  }
  Dataset data;
  data.covariate_kind = discrete ? CovariateKind::Discrete : CovariateKind::Continuous;
  data.records.reserve(raw_w.size());
  for (std::size_t i = 0; i < raw_w.size(); ++i) {
    Covariate w;
    if (discrete) {
      w = static_cast<int>(io::parse_long(raw_w[i], linenos[i], "w"));
    } else {
      w = io::parse_double(raw_w[i], linenos[i], "w");
    }
    try {
      data.records.emplace_back(w, as[i], ys[i]);
    } catch (const std::invalid_argument& e) {
      throw DataError(linenos[i], e.what());
    }
  }
  return data;
}

inline Dataset read_observations_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return read_observations(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void write_observations(std::ostream& out, const Dataset& data) {
  out << "w,a,y\n";
  for (const Observation& o : data.records) {
    if (data.covariate_kind == CovariateKind::Discrete) {
      out << stratum(o.w);
    } else {
      out << io::g17(position(o.w));
    }
    out << ',' << o.a << ',' << io::g17(o.y) << '\n';
  }
}

// ---------------------------------------------------------------------------
// replicate-level output of `simulate`, re-readable by `summarize`

inline const char* kReplicatesHeader =
    "dgp,n,ell_n,alpha,mode,replicate,truth,da_ok,da_target,rule_fingerprint,"
    "method,ok,error,point,lower,upper,lower_one_sided,width,"
    "covered_truth,covered_lower,covered_da,max_abs_standardized";

inline void write_replicates(std::ostream& out, const ExperimentConfig& cfg, double truth,
                             const std::vector<ReplicateRecord>& records) {
  out << kReplicatesHeader << '\n';
  const std::string meta = dgp_name(cfg.dgp) + "," + std::to_string(cfg.n) + "," +
                           std::to_string(cfg.ell_n) + "," + io::g17(cfg.alpha) + "," +
                           mode_name(cfg.resolved_mode());
  for (const ReplicateRecord& r : records) {
    for (Method m : cfg.methods) {
      auto it = r.results.find(m);
      if (it == r.results.end()) continue;
      const MethodResult& res = it->second;
      out << meta << ',' << r.index << ',' << io::g17(truth) << ',' << (r.da_ok ? 1 : 0) << ','
          << io::g17(r.da_target) << ',' << r.rule_fingerprint << ',' << method_name(m) << ','
          << (res.ok ? 1 : 0) << ',' << io::quote(res.error) << ',' << io::g17(res.point) << ','
          << io::g17(res.lower) << ',' << io::g17(res.upper) << ','
          << io::g17(res.lower_one_sided) << ',' << io::g17(res.width) << ','
          << (res.covered_truth ? 1 : 0) << ',' << (res.covered_lower ? 1 : 0) << ','
          << (res.covered_da ? 1 : 0) << ',' << io::g17(res.max_abs_standardized) << '\n';
    }
  }
}

struct ReplicateFile {
  ExperimentConfig cfg;  // dgp, n, ell_n, alpha, mode, methods recovered from rows
  double truth = 0.0;
  std::vector<ReplicateRecord> records;
};

inline ReplicateFile read_replicates(std::istream& in) {
  std::size_t lineno = 1;
  const std::string header = io::read_line(in);
  if (io::trim(header) != kReplicatesHeader) {
    throw DataError(lineno, "unrecognized replicate file header");
  }
  ReplicateFile file;
  bool have_meta = false;
  std::map<std::size_t, std::size_t> index_of;  // replicate -> slot
  while (in) {
    const std::string line = io::read_line(in);
    ++lineno;
    if (line.empty()) {
      if (!in) break;
      continue;
    }
    const auto cols = io::split_csv(line, lineno);
    if (cols.size() != 22) {
      throw DataError(lineno, "expected 22 fields, got " + std::to_string(cols.size()));
    }
    if (!have_meta) {
      file.cfg.dgp = dgp_from_name(io::trim(cols[0]));
      file.cfg.n = static_cast<std::size_t>(io::parse_long(cols[1], lineno, "n"));
      file.cfg.ell_n = static_cast<std::size_t>(io::parse_long(cols[2], lineno, "ell_n"));
      file.cfg.alpha = io::parse_double(cols[3], lineno, "alpha");
      file.cfg.mode = io::trim(cols[4]) == "fully-estimated" ? NuisanceMode::FullyEstimated
                                                             : NuisanceMode::OracleNuisance;
      file.cfg.methods.clear();
      file.truth = io::parse_double(cols[6], lineno, "truth");
      have_meta = true;
    }
    const std::size_t rep = static_cast<std::size_t>(io::parse_long(cols[5], lineno, "replicate"));
    auto slot = index_of.find(rep);
    if (slot == index_of.end()) {
      slot = index_of.emplace(rep, file.records.size()).first;
      ReplicateRecord rec;
      rec.index = rep;
      rec.truth = io::parse_double(cols[6], lineno, "truth");
      rec.da_ok = io::parse_long(cols[7], lineno, "da_ok") != 0;
      rec.da_target = io::parse_double(cols[8], lineno, "da_target");
      rec.rule_fingerprint = io::trim(cols[9]);
      file.records.push_back(std::move(rec));
    }
    const Method m = method_from_name(io::trim(cols[10]));
    bool known = false;
    for (Method mm : file.cfg.methods) known = known || mm == m;
    if (!known) file.cfg.methods.push_back(m);
    MethodResult res;
    res.ok = io::parse_long(cols[11], lineno, "ok") != 0;
    res.error = cols[12];
    res.point = io::parse_double(cols[13], lineno, "point");
    res.lower = io::parse_double(cols[14], lineno, "lower");
    res.upper = io::parse_double(cols[15], lineno, "upper");
    res.lower_one_sided = io::parse_double(cols[16], lineno, "lower_one_sided");
    res.width = io::parse_double(cols[17], lineno, "width");
    res.covered_truth = io::parse_long(cols[18], lineno, "covered_truth") != 0;
    res.covered_lower = io::parse_long(cols[19], lineno, "covered_lower") != 0;
    res.covered_da = io::parse_long(cols[20], lineno, "covered_da") != 0;
    res.max_abs_standardized = io::parse_double(cols[21], lineno, "max_abs_standardized");
    file.records[slot->second].results[m] = res;
  }
  if (!have_meta) throw DataError("replicate file has no data rows");
  file.cfg.replicates = file.records.size();
  return file;
}

inline ReplicateFile read_replicates_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return read_replicates(in);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// summary output

inline void write_summary(std::ostream& out, const MonteCarloReport& rep) {
  out << "dgp,n,ell_n,replicates,alpha,mode,truth,method,n_ok,n_failed,"
         "coverage_two_sided,coverage_two_sided_se,coverage_lower,coverage_lower_se,"
         "n_da,coverage_da,coverage_da_se,mean_bias,mean_bias_se,squared_bias,"
         "mean_width,mean_width_se\n";
  for (const auto& [m, s] : rep.methods) {
    out << dgp_name(rep.dgp) << ',' << rep.n << ',' << rep.ell_n << ',' << rep.replicates << ','
        << io::g17(rep.alpha) << ',' << mode_name(rep.mode) << ',' << io::g17(rep.truth) << ','
        << method_name(m) << ',' << s.n_ok << ',' << s.n_failed << ','
        << io::g17(s.coverage_two_sided) << ',' << io::g17(s.coverage_two_sided_se) << ','
        << io::g17(s.coverage_lower) << ',' << io::g17(s.coverage_lower_se) << ',' << s.n_da
        << ',' << io::g17(s.coverage_da) << ',' << io::g17(s.coverage_da_se) << ','
        << io::g17(s.mean_bias) << ',' << io::g17(s.mean_bias_se) << ','
        << io::g17(s.squared_bias) << ',' << io::g17(s.mean_width) << ','
        << io::g17(s.mean_width_se) << '\n';
  }
}

inline void write_sweep_summary(std::ostream& out, const SweepReport& rep) {
  out << "dgp,n,replicates,draws,method,m,n_ok,n_failed,coverage,coverage_se,"
         "mean_width,width_ratio_vs_online,mean_ill_defined\n";
  out << dgp_name(rep.dgp) << ',' << rep.n << ',' << rep.replicates << ',' << rep.draws
      << ",online," << rep.n << ',' << rep.online_n_ok << ','
      << (rep.replicates - rep.online_n_ok) << ',' << io::g17(rep.online_coverage) << ','
      << io::g17(rep.online_coverage_se) << ',' << io::g17(rep.online_mean_width) << ",1,0\n";
  for (const SweepRow& r : rep.rows) {
    out << dgp_name(rep.dgp) << ',' << rep.n << ',' << rep.replicates << ',' << rep.draws
        << ",m-out-of-n," << r.m << ',' << r.n_ok << ',' << r.n_failed << ','
        << io::g17(r.coverage) << ',' << io::g17(r.coverage_se) << ',' << io::g17(r.mean_width)
        << ',' << io::g17(r.width_ratio_vs_online) << ',' << io::g17(r.mean_ill_defined) << '\n';
  }
}

// ---------------------------------------------------------------------------
// chart: bootstrap width ratio (bars) and coverage (dots) against m/n

inline void write_sweep_chart(std::ostream& out, const SweepReport& rep) {
  const int width = 640, height = 420;
  const int left = 70, right = 70, top = 40, bottom = 60;
  const int plot_w = width - left - right, plot_h = height - top - bottom;
  double max_ratio = 1.0;
  for (const SweepRow& r : rep.rows) max_ratio = std::max(max_ratio, r.width_ratio_vs_online);
  max_ratio = std::ceil(max_ratio * 2.0) / 2.0 + 0.5;

  auto xpos = [&](double m_frac) { return left + m_frac * plot_w; };
  auto ypos_ratio = [&](double v) { return top + plot_h * (1.0 - v / max_ratio); };
  auto ypos_cov = [&](double v) { return top + plot_h * (1.0 - v); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">subsample bootstrap vs online interval, "
      << dgp_name(rep.dgp) << ", n=" << rep.n << "</text>\n";

  // axes
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left + plot_w << "\" y1=\"" << top << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double frac = i / 4.0;
    const double rv = frac * max_ratio;
    out << "<text x=\"" << left - 8 << "\" y=\"" << ypos_ratio(rv) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << io::g17(std::round(rv * 100.0) / 100.0) << "</text>\n";
    out << "<text x=\"" << left + plot_w + 8 << "\" y=\"" << ypos_cov(frac) + 4
        << "\" text-anchor=\"start\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#c22\">"
        << io::g17(std::round(frac * 100.0)) << "%</text>\n";
  }
  out << "<text x=\"18\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 18 "
      << top + plot_h / 2 << ")\">width ratio vs online</text>\n";
  out << "<text x=\"" << width - 14 << "\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#c22\" "
         "transform=\"rotate(90 "
      << width - 14 << ' ' << top + plot_h / 2 << ")\">coverage</text>\n";
  out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">m / n</text>\n";

  // reference lines: ratio 1 and nominal coverage 95%
  out << "<line x1=\"" << left << "\" y1=\"" << ypos_ratio(1.0) << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << ypos_ratio(1.0) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << ypos_cov(0.95) << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << ypos_cov(0.95) << "\" stroke=\"#c22\" stroke-dasharray=\"2 3\"/>\n";

  const double bar_w = plot_w / (1.5 * std::max<std::size_t>(1, rep.rows.size()) + 1.0);
  for (const SweepRow& r : rep.rows) {
    const double frac = static_cast<double>(r.m) / rep.n;
    const double x = xpos(frac);
    const double y = ypos_ratio(r.width_ratio_vs_online);
    out << "<rect x=\"" << x - bar_w / 2 << "\" y=\"" << y << "\" width=\"" << bar_w
        << "\" height=\"" << (top + plot_h) - y << "\" fill=\"#68a\" opacity=\"0.8\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << io::g17(std::round(frac * 100.0) / 100.0) << "</text>\n";
  }
  std::ostringstream points;
  for (const SweepRow& r : rep.rows) {
    const double x = xpos(static_cast<double>(r.m) / rep.n);
    const double y = ypos_cov(r.coverage);
    points << x << ',' << y << ' ';
    out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3.5\" fill=\"#c22\"/>\n";
  }
  out << "<polyline points=\"" << points.str()
      << "\" fill=\"none\" stroke=\"#c22\" stroke-width=\"1.5\"/>\n";
  out << "</svg>\n";
}

}  // namespace optvalue
