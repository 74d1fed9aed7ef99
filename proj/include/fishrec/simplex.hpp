#pragma once

#include <Eigen/Dense>

namespace fishrec {

// min c.x subject to a x <= b, 0 <= x <= upper (entries of upper may be
// +infinity). Solved by a two-phase primal simplex with bounded variables.
struct LpProblem {
    Eigen::VectorXd c;
    Eigen::MatrixXd a;
    Eigen::VectorXd b;
    Eigen::VectorXd upper;
};

struct LpResult {
    enum class Status { optimal, infeasible, unbounded, iteration_limit };
    Status status = Status::optimal;
    double objective = 0.0;
    Eigen::VectorXd x;
};

LpResult solve_lp(const LpProblem& p, int max_pivots = 50000);

}  // namespace fishrec
