#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "glee/morph/fit.hpp"

namespace glee::morph {

struct CoefficientRow {
  std::string frame_id;
  Eigen::VectorXd f_s;
  Eigen::VectorXd f_exp;
  Eigen::Matrix<double, 6, 1> pose = Eigen::Matrix<double, 6, 1>::Zero();
  double final_cost = 0.0;
  bool converged = false;
  // "ok" or a short failure reason when the fit was replaced by zeros.
  std::string status = "ok";
};

CoefficientRow make_row(const std::string& frame_id, const FitResult& fit);

// Zero coefficients with the failure flagged.
CoefficientRow failed_row(const std::string& frame_id, std::size_t shape_count,
                          std::size_t expr_count, const std::string& reason);

// Tab-separated, one frame per line after a header:
//   frame_id, fs_0..fs_{Ns-1}, fexp_0..fexp_{Ne-1}, rx ry rz tx ty tz,
//   final_cost, converged (0/1), status
// Floats use the shortest representation that round-trips exactly.
void write_coefficients(const std::string& path, const std::vector<CoefficientRow>& rows);
std::vector<CoefficientRow> read_coefficients(const std::string& path);

using CoefficientTable = std::map<std::string, CoefficientRow>;
CoefficientTable index_by_frame(std::vector<CoefficientRow> rows);

}  // namespace glee::morph
