#pragma once

#include "blindsr2d/model.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace blindsr2d {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(s);
  while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline double parse_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidArgument("not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  const auto* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, v);
  if (ec != std::errc() || p != end) throw InvalidArgument("not an integer: '" + s + "'");
  return v;
}

// Flat `key = value` file; `#` starts a comment. Lists are comma separated.
class Config {
 public:
  static Config parse(std::istream& is) {
    Config c;
    std::string line;
    int no = 0;
    while (std::getline(is, line)) {
      ++no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(no) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw InvalidArgument("config line " + std::to_string(no) + ": empty key");
      c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
  }
  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path);
    return parse(is);
  }

  bool has(const std::string& k) const { return values_.count(k) > 0; }
  void set(const std::string& k, const std::string& v) { values_[k] = v; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string str(const std::string& k, const std::string& def) const { return has(k) ? values_.at(k) : def; }
  std::string str(const std::string& k) const {
    if (!has(k)) throw InvalidArgument("config: missing key '" + k + "'");
    return values_.at(k);
  }
  double num(const std::string& k, double def) const { return has(k) ? parse_double(values_.at(k)) : def; }
  double num(const std::string& k) const { return parse_double(str(k)); }
  long long integer(const std::string& k, long long def) const { return has(k) ? parse_int(values_.at(k)) : def; }
  long long integer(const std::string& k) const { return parse_int(str(k)); }
  bool flag(const std::string& k, bool def) const {
    if (!has(k)) return def;
    const std::string v = values_.at(k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidArgument("config: '" + k + "' is not a boolean");
  }
  std::vector<double> nums(const std::string& k, const std::vector<double>& def) const {
    if (!has(k)) return def;
    std::vector<double> out;
    for (const auto& t : split(values_.at(k), ',')) out.push_back(parse_double(t));
    return out;
  }

  // Rejects keys outside `known` so that typos fail loudly.
  void check_known(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_)
      if (!known.count(k)) throw InvalidArgument("config: unknown key '" + k + "'");
  }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline std::string fmt_pair(cd z) { return fmt(z.real()) + "," + fmt(z.imag()); }

inline std::vector<cd> parse_pairs(const std::string& row) {
  const auto parts = split(row, ',');
  if (parts.size() % 2 != 0) throw IoError("odd number of values in complex row: " + row);
  std::vector<cd> out;
  for (size_t i = 0; i < parts.size(); i += 2) out.emplace_back(parse_double(parts[i]), parse_double(parts[i + 1]));
  return out;
}

// Instance text format: `dims N K R`, then L subspace rows of K `re,im` pairs, then R
// truth rows `tau,f,c_re,c_im,h_re,h_im,...` (the shift written as one real pair).
inline void write_instance(std::ostream& os, const ProblemDims& dims, const Subspace& D, const GroundTruth& truth) {
  os << "dims " << dims.N << ' ' << dims.K << ' ' << truth.R() << '\n';
  for (int i = 0; i < D.L(); ++i) {
    for (int j = 0; j < D.K(); ++j) os << (j ? "," : "") << fmt_pair(D.D(i, j));
    os << '\n';
  }
  for (int j = 0; j < truth.R(); ++j) {
    os << fmt_pair({truth.shifts[j].tau, truth.shifts[j].f}) << ',' << fmt_pair(truth.amplitudes[j]);
    for (int i = 0; i < truth.orientations[j].size(); ++i) os << ',' << fmt_pair(truth.orientations[j](i));
    os << '\n';
  }
}

struct Instance {
  ProblemDims dims;
  Subspace D;
  GroundTruth truth;
};

inline Instance read_instance(std::istream& is) {
  std::string line;
  auto next = [&]() {
    while (std::getline(is, line)) {
      line = trim(line);
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  };
  if (!next()) throw IoError("instance: missing dims header");
  std::istringstream hs(line);
  std::string tag;
  int N = 0, K = 0, R = 0;
  if (!(hs >> tag >> N >> K >> R) || tag != "dims") throw IoError("instance: bad dims header: " + line);
  Instance inst;
  inst.dims = ProblemDims::make(N, K, R);
  inst.D.D.resize(inst.dims.L, K);
  for (int i = 0; i < inst.dims.L; ++i) {
    if (!next()) throw IoError("instance: missing subspace row");
    const auto row = parse_pairs(line);
    if (static_cast<int>(row.size()) != K) throw IoError("instance: subspace row has wrong width");
    for (int j = 0; j < K; ++j) inst.D.D(i, j) = row[j];
  }
  for (int j = 0; j < R; ++j) {
    if (!next()) throw IoError("instance: missing truth row");
    const auto row = parse_pairs(line);
    if (static_cast<int>(row.size()) != K + 2) throw IoError("instance: truth row has wrong width");
    inst.truth.shifts.push_back({row[0].real(), row[0].imag()});
    inst.truth.amplitudes.push_back(row[1]);
    CVec h(K);
    for (int i = 0; i < K; ++i) h(i) = row[2 + i];
    inst.truth.orientations.push_back(h);
  }
  return inst;
}

// Generic complex matrix in the same row format, header `matrix rows cols`.
inline void write_matrix(std::ostream& os, const CMat& M) {
  os << "matrix " << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) os << (j ? "," : "") << fmt_pair(M(i, j));
    os << '\n';
  }
}

inline CMat read_matrix(std::istream& is) {
  std::string tag;
  Eigen::Index r = 0, c = 0;
  if (!(is >> tag >> r >> c) || tag != "matrix") throw IoError("matrix: bad header");
  std::string line;
  std::getline(is, line);
  CMat M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (!std::getline(is, line)) throw IoError("matrix: missing row");
    const auto row = parse_pairs(line);
    if (static_cast<Eigen::Index>(row.size()) != c) throw IoError("matrix: row has wrong width");
    for (Eigen::Index j = 0; j < c; ++j) M(i, j) = row[j];
  }
  return M;
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << body;
  if (!os) throw IoError("write failed for " + path);
}

}  // namespace blindsr2d
