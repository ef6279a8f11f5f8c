#include "dsr/model.hpp"
#include "text_util.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace dsr {

namespace {

constexpr const char* kMagic = "dsr-problem";
constexpr int kVersion = 1;

void write_vector(std::ostream& os, const char* key, const Vector& v) {
  os << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << detail::fmt_double(v[i]);
  os << '\n';
}

std::vector<std::string> next_line(std::istream& is, const std::string& expected_key) {
  std::string line;
  while (std::getline(is, line)) {
    auto toks = detail::split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks[0] != expected_key)
      throw IoError("problem file: expected '" + expected_key + "', found '" + toks[0] + "'");
    return toks;
  }
  throw IoError("problem file: unexpected end of input before '" + expected_key + "'");
}

long long read_int(std::istream& is, const std::string& key) {
  auto toks = next_line(is, key);
  if (toks.size() != 2) throw IoError("problem file: bad '" + key + "' line");
  return detail::parse_int(toks[1]);
}

Vector read_vector(std::istream& is, const std::string& key, Eigen::Index len) {
  auto toks = next_line(is, key);
  if (static_cast<Eigen::Index>(toks.size()) != len + 1)
    throw IoError("problem file: '" + key + "' has wrong length");
  Vector v(len);
  for (Eigen::Index i = 0; i < len; ++i) v[i] = detail::parse_double(toks[i + 1]);
  return v;
}

}  // namespace

void save_problem(const Problem& problem, std::ostream& os) {
  os << kMagic << ' ' << kVersion << '\n';
  os << "n " << problem.n << '\n';
  os << "m " << problem.m << '\n';
  os << "k " << problem.k << '\n';
  os << "p " << problem.p << '\n';
  os << "seed " << problem.seed << '\n';
  os << "noise_std " << detail::fmt_double(problem.noise_std) << '\n';
  os << "spectral_cap " << detail::fmt_double(problem.spectral_cap) << '\n';
  os << "ensemble " << to_string(problem.ensemble) << '\n';
  os << "offsets";
  for (int off : problem.slice_offsets()) os << ' ' << off;
  os << '\n';
  write_vector(os, "x_star", problem.x_star);
  write_vector(os, "noise", problem.noise);
  for (const auto& s : problem.slices) {
    for (Eigen::Index r = 0; r < s.a.rows(); ++r) {
      os << "row " << detail::fmt_double(s.b[r]);
      for (Eigen::Index c = 0; c < s.a.cols(); ++c) os << ' ' << detail::fmt_double(s.a(r, c));
      os << '\n';
    }
  }
  os << "end\n";
}

Problem load_problem(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("problem file: empty input");
  auto head = detail::split_ws(line);
  if (head.size() != 2 || head[0] != kMagic)
    throw IoError("problem file: missing '" + std::string(kMagic) + "' header");
  if (detail::parse_int(head[1]) != kVersion)
    throw IoError("problem file: unsupported version " + head[1]);

  Problem prob;
  prob.n = static_cast<int>(read_int(is, "n"));
  prob.m = static_cast<int>(read_int(is, "m"));
  prob.k = static_cast<int>(read_int(is, "k"));
  prob.p = static_cast<int>(read_int(is, "p"));
  prob.seed = static_cast<std::uint64_t>(read_int(is, "seed"));
  prob.noise_std = detail::parse_double(next_line(is, "noise_std").at(1));
  prob.spectral_cap = detail::parse_double(next_line(is, "spectral_cap").at(1));
  prob.ensemble = ensemble_from_string(next_line(is, "ensemble").at(1));
  if (prob.n < 1 || prob.m < 1 || prob.p < 1 || prob.m < prob.p)
    throw IoError("problem file: inconsistent dimensions");

  auto off_toks = next_line(is, "offsets");
  if (static_cast<int>(off_toks.size()) != prob.p + 2)
    throw IoError("problem file: offsets must list p + 1 entries");
  std::vector<int> offsets;
  for (std::size_t i = 1; i < off_toks.size(); ++i)
    offsets.push_back(static_cast<int>(detail::parse_int(off_toks[i])));
  if (offsets.front() != 0 || offsets.back() != prob.m)
    throw IoError("problem file: offsets must span [0, m]");

  prob.x_star = read_vector(is, "x_star", prob.n);
  prob.noise = read_vector(is, "noise", prob.m);

  for (int agent = 0; agent < prob.p; ++agent) {
    const int rows = offsets[agent + 1] - offsets[agent];
    if (rows < 1) throw IoError("problem file: empty slice");
    SensingSlice s;
    s.a.resize(rows, prob.n);
    s.b.resize(rows);
    for (int r = 0; r < rows; ++r) {
      auto toks = next_line(is, "row");
      if (static_cast<int>(toks.size()) != prob.n + 2) throw IoError("problem file: bad row length");
      s.b[r] = detail::parse_double(toks[1]);
      for (int c = 0; c < prob.n; ++c) s.a(r, c) = detail::parse_double(toks[c + 2]);
    }
    prob.slices.push_back(std::move(s));
  }
  next_line(is, "end");
  return prob;
}

void save_problem(const Problem& problem, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  save_problem(problem, os);
  if (!os) throw IoError("write failed for '" + path + "'");
}

Problem load_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  return load_problem(is);
}

}  // namespace dsr
