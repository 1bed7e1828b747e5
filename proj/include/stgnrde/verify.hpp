#pragma once

// Self-checks behind `verify`: log-signature algebra, gradients, solver
// orders and metric arithmetic.

#include <iosfwd>
#include <string>
#include <vector>

namespace stgnrde {

struct CheckResult {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string detail;
};

// suite: logsig | grad | solver | metrics | all
std::vector<CheckResult> run_suite(const std::string& suite);

// One aligned row per check; returns true when every check passed.
bool print_checks(std::ostream& out, const std::vector<CheckResult>& checks);

// Reference signature of a polyline by direct summation over nondecreasing
// segment sequences (no Chen products).  Returns levels 1..depth.
std::vector<std::vector<double>> direct_polyline_signature(const std::vector<std::vector<double>>& points,
                                                           std::size_t depth);

}  // namespace stgnrde
