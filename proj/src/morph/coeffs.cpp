#include "glee/morph/coeffs.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"

namespace glee::morph {

namespace {

void put(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(where + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

CoefficientRow make_row(const std::string& frame_id, const FitResult& fit) {
  CoefficientRow row;
  row.frame_id = frame_id;
  row.f_s = fit.f_s;
  row.f_exp = fit.f_exp;
  row.pose = fit.pose.extrinsics();
  row.final_cost = fit.final_cost;
  row.converged = fit.converged;
  return row;
}

CoefficientRow failed_row(const std::string& frame_id, std::size_t shape_count,
                          std::size_t expr_count, const std::string& reason) {
  CoefficientRow row;
  row.frame_id = frame_id;
  row.f_s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape_count));
  row.f_exp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(expr_count));
  row.final_cost = 0.0;
  row.converged = false;
  row.status = reason.empty() ? "failed" : reason;
  for (char& c : row.status) {
    if (c == '\t' || c == '\n' || c == '\r') c = ' ';
  }
  return row;
}

void write_coefficients(const std::string& path, const std::vector<CoefficientRow>& rows) {
  std::string text;
  const Eigen::Index ns = rows.empty() ? 0 : rows.front().f_s.size();
  const Eigen::Index ne = rows.empty() ? 0 : rows.front().f_exp.size();
  text += "frame_id";
  for (Eigen::Index i = 0; i < ns; ++i) text += "\tfs_" + std::to_string(i);
  for (Eigen::Index i = 0; i < ne; ++i) text += "\tfexp_" + std::to_string(i);
  text += "\trx\try\trz\ttx\tty\ttz\tfinal_cost\tconverged\tstatus\n";
  for (const CoefficientRow& row : rows) {
    if (row.f_s.size() != ns || row.f_exp.size() != ne) {
      throw ValidationError("coefficient rows have inconsistent lengths");
    }
    if (row.frame_id.find_first_of("\t\n") != std::string::npos) {
      throw ValidationError("frame id contains a tab or newline: " + row.frame_id);
    }
    text += row.frame_id;
    for (Eigen::Index i = 0; i < ns; ++i) {
      text += '\t';
      put(text, row.f_s(i));
    }
    for (Eigen::Index i = 0; i < ne; ++i) {
      text += '\t';
      put(text, row.f_exp(i));
    }
    for (Eigen::Index i = 0; i < 6; ++i) {
      text += '\t';
      put(text, row.pose(i));
    }
    text += '\t';
    put(text, row.final_cost);
    text += row.converged ? "\t1\t" : "\t0\t";
    text += row.status;
    text += '\n';
  }
  io::write_text_atomic(path, text);
}

std::vector<CoefficientRow> read_coefficients(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open coefficient table " + path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty coefficient table");
  const std::vector<std::string> header = split_tabs(line);
  if (header.empty() || header[0] != "frame_id") {
    throw ValidationError(path + ": header must start with frame_id");
  }
  std::size_t ns = 0, ne = 0;
  for (const std::string& h : header) {
    if (h.rfind("fs_", 0) == 0) ++ns;
    if (h.rfind("fexp_", 0) == 0) ++ne;
  }
  const std::size_t width = 1 + ns + ne + 6 + 3;
  if (header.size() != width) throw ValidationError(path + ": unexpected header layout");

  std::vector<CoefficientRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_tabs(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != width) throw ValidationError(where + ": expected " + std::to_string(width) + " fields");
    CoefficientRow row;
    row.frame_id = f[0];
    row.f_s.resize(static_cast<Eigen::Index>(ns));
    row.f_exp.resize(static_cast<Eigen::Index>(ne));
    std::size_t k = 1;
    for (std::size_t i = 0; i < ns; ++i) row.f_s(static_cast<Eigen::Index>(i)) = parse_double(f[k++], where);
    for (std::size_t i = 0; i < ne; ++i) row.f_exp(static_cast<Eigen::Index>(i)) = parse_double(f[k++], where);
    for (Eigen::Index i = 0; i < 6; ++i) row.pose(i) = parse_double(f[k++], where);
    row.final_cost = parse_double(f[k++], where);
    if (f[k] != "0" && f[k] != "1") throw ValidationError(where + ": converged must be 0 or 1");
    row.converged = f[k++] == "1";
    row.status = f[k];
    rows.push_back(std::move(row));
  }
  return rows;
}

CoefficientTable index_by_frame(std::vector<CoefficientRow> rows) {
  CoefficientTable table;
  for (CoefficientRow& row : rows) {
    const std::string id = row.frame_id;
    if (!table.emplace(id, std::move(row)).second) {
      throw ValidationError("duplicate frame id in coefficient table: " + id);
    }
  }
  return table;
}

}  // namespace glee::morph
