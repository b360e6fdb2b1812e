#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "consensus/harness.hpp"

namespace consensus::harness {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (!traj.full()) throw InvalidArgument("trajectory CSV needs the full state sequence");
  const std::size_t n = traj.states.front().size();
  os << "t";
  for (std::size_t i = 0; i < n; ++i) os << ",component_" << i;
  os << ",err_inf,osc\n";
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const StepDiagnostics& d = traj.diagnostics[t];
    os << d.t;
    for (double v : traj.states[t]) os << ',' << format_double(v);
    os << ',' << (d.err_inf ? format_double(*d.err_inf) : "") << ',' << format_double(d.osc) << '\n';
  }
}

void write_ensemble_csv(std::ostream& os, const Matrix& points) {
  os << "run";
  for (std::size_t j = 0; j < points.cols(); ++j) os << ",component_" << j;
  os << '\n';
  for (std::size_t r = 0; r < points.rows(); ++r) {
    os << r;
    for (double v : points.row(r)) os << ',' << format_double(v);
    os << '\n';
  }
}

Matrix read_ensemble_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("", "empty ensemble CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "run") throw ParseError("", "ensemble CSV header must start with 'run'");
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "component_" + std::to_string(j - 1)) {
      throw ParseError("", "unexpected column '" + header[j] + "'", "header");
    }
  }
  const std::size_t n = header.size() - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(rows + 2);
    const char* p = line.data();
    const char* end = p + line.size();
    std::size_t run = 0;
    auto r = std::from_chars(p, end, run);
    if (r.ec != std::errc() || run != rows) throw ParseError("", "expected run index " + std::to_string(rows), where);
    p = r.ptr;
    for (std::size_t j = 0; j < n; ++j) {
      if (p == end || *p != ',') throw ParseError("", "expected " + std::to_string(n) + " components", where);
      double v = 0.0;
      r = std::from_chars(p + 1, end, v);
      if (r.ec != std::errc()) throw ParseError("", "malformed number", where);
      values.push_back(v);
      p = r.ptr;
    }
    if (p != end) throw ParseError("", "trailing characters", where);
    ++rows;
  }
  Matrix m(rows, n);
  std::copy(values.begin(), values.end(), m.data().begin());
  return m;
}

}  // namespace consensus::harness
