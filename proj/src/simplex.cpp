#include "fishrec/simplex.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace fishrec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivTol = 1e-9;
constexpr double kCostTol = 1e-9;

struct Tableau {
    Eigen::MatrixXd tab;          // m x ntot, current B^-1 * A_all
    Eigen::VectorXd xb;           // basic variable values
    std::vector<int> basis;       // variable index per row
    std::vector<char> is_basic;   // per variable
    std::vector<char> at_upper;   // nonbasic bound flag
    Eigen::VectorXd ub;           // per variable upper bound
    int m = 0, ntot = 0;

    void pivot(int row, int col) {
        tab.row(row) /= tab(row, col);
        for (int i = 0; i < m; ++i) {
            if (i == row) continue;
            const double f = tab(i, col);
            if (f != 0.0) tab.row(i) -= f * tab.row(row);
        }
    }

    // One simplex iteration for the given costs. Returns:
    //  0 optimal, 1 pivoted or bound-flipped, -1 unbounded.
    int step(const Eigen::VectorXd& cost, bool bland) {
        // reduced costs d = c - c_B^T tab
        Eigen::VectorXd cb(m);
        for (int i = 0; i < m; ++i) cb[i] = cost[basis[i]];
        Eigen::VectorXd d = cost - tab.transpose() * cb;

        int enter = -1;
        double best = 0.0;
        for (int j = 0; j < ntot; ++j) {
            if (is_basic[j]) continue;
            double score = 0.0;
            if (!at_upper[j] && d[j] < -kCostTol) score = -d[j];
            else if (at_upper[j] && d[j] > kCostTol) score = d[j];
            else continue;
            if (bland) {
                enter = j;
                break;
            }
            if (score > best) {
                best = score;
                enter = j;
            }
        }
        if (enter < 0) return 0;

        const bool from_lower = !at_upper[enter];
        // moving x_enter by +t from lower bound changes xb by -t*w;
        // moving by -t from upper bound changes xb by +t*w
        const Eigen::VectorXd w = tab.col(enter);
        double t_max = ub[enter];  // bound flip distance
        int leave_row = -1;
        bool leave_at_upper = false;
        for (int i = 0; i < m; ++i) {
            const double wi = from_lower ? w[i] : -w[i];
            double lim = kInf;
            bool to_upper = false;
            if (wi > kPivTol) {
                lim = xb[i] / wi;  // basic drops to 0
            } else if (wi < -kPivTol && std::isfinite(ub[basis[i]])) {
                lim = (ub[basis[i]] - xb[i]) / (-wi);  // basic hits its upper bound
                to_upper = true;
            } else {
                continue;
            }
            // tie-break toward pivoting so degenerate steps still make progress
            if (lim < t_max - 1e-12 ||
                (std::abs(lim - t_max) <= 1e-12 && leave_row < 0 && std::isfinite(lim))) {
                t_max = std::max(lim, 0.0);
                leave_row = i;
                leave_at_upper = to_upper;
            }
        }
        if (!std::isfinite(t_max)) return -1;

        if (leave_row < 0) {
            // bound flip: variable jumps to its other bound, basis unchanged
            xb += (from_lower ? -t_max : t_max) * w;
            at_upper[enter] = from_lower ? 1 : 0;
            return 1;
        }

        xb += (from_lower ? -t_max : t_max) * w;
        const int leaving = basis[leave_row];
        is_basic[leaving] = 0;
        at_upper[leaving] = leave_at_upper ? 1 : 0;
        basis[leave_row] = enter;
        is_basic[enter] = 1;
        xb[leave_row] = from_lower ? t_max : ub[enter] - t_max;
        at_upper[enter] = 0;
        pivot(leave_row, enter);
        return 1;
    }

    double objective(const Eigen::VectorXd& cost) const {
        double obj = 0.0;
        for (int i = 0; i < m; ++i) obj += cost[basis[i]] * xb[i];
        for (int j = 0; j < ntot; ++j)
            if (!is_basic[j] && at_upper[j]) obj += cost[j] * ub[j];
        return obj;
    }

    Eigen::VectorXd solution(int n) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < n; ++j)
            if (!is_basic[j] && at_upper[j]) x[j] = ub[j];
        for (int i = 0; i < m; ++i)
            if (basis[i] < n) x[basis[i]] = xb[i];
        return x;
    }
};

LpResult::Status run(Tableau& t, const Eigen::VectorXd& cost, int max_pivots, int& used) {
    const int bland_after = 4 * (t.m + t.ntot);
    int stalled = 0;
    double last_obj = kInf;
    while (used < max_pivots) {
        const bool bland = stalled > bland_after;
        const int r = t.step(cost, bland);
        ++used;
        if (r == 0) return LpResult::Status::optimal;
        if (r == -1) return LpResult::Status::unbounded;
        const double obj = t.objective(cost);
        if (obj < last_obj - 1e-12) {
            stalled = 0;
            last_obj = obj;
        } else {
            ++stalled;
        }
    }
    return LpResult::Status::iteration_limit;
}

}  // namespace

LpResult solve_lp(const LpProblem& p, int max_pivots) {
    const int m = static_cast<int>(p.a.rows());
    const int n = static_cast<int>(p.a.cols());

    // count artificials: rows whose slack start value b_i would be negative
    std::vector<int> art_rows;
    for (int i = 0; i < m; ++i)
        if (p.b[i] < 0.0) art_rows.push_back(i);
    const int n_art = static_cast<int>(art_rows.size());
    const int ntot = n + m + n_art;

    Tableau t;
    t.m = m;
    t.ntot = ntot;
    t.tab = Eigen::MatrixXd::Zero(m, ntot);
    t.tab.block(0, 0, m, n) = p.a;
    t.tab.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
    t.xb = p.b;
    t.ub = Eigen::VectorXd::Constant(ntot, kInf);
    t.ub.head(n) = p.upper;
    t.basis.resize(m);
    t.is_basic.assign(ntot, 0);
    t.at_upper.assign(ntot, 0);

    for (int i = 0; i < m; ++i) {
        t.basis[i] = n + i;  // slack basis
        t.is_basic[n + i] = 1;
    }
    // negate infeasible rows and swap in artificials
    for (int k = 0; k < n_art; ++k) {
        const int i = art_rows[k];
        t.tab.row(i) = -t.tab.row(i);
        t.xb[i] = -t.xb[i];
        const int aj = n + m + k;
        t.tab(i, aj) = 1.0;
        t.is_basic[t.basis[i]] = 0;
        t.at_upper[t.basis[i]] = 0;  // slack rests at its lower bound
        t.basis[i] = aj;
        t.is_basic[aj] = 1;
    }

    int used = 0;
    LpResult res;

    if (n_art > 0) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(ntot);
        for (int k = 0; k < n_art; ++k) phase1[n + m + k] = 1.0;
        const auto st = run(t, phase1, max_pivots, used);
        if (st == LpResult::Status::iteration_limit) {
            res.status = st;
            return res;
        }
        if (t.objective(phase1) > 1e-7) {
            res.status = LpResult::Status::infeasible;
            return res;
        }
        // pin artificials to zero for phase 2; drive basic ones out if possible
        for (int i = 0; i < m; ++i) {
            if (t.basis[i] < n + m) continue;
            int col = -1;
            for (int j = 0; j < n + m; ++j) {
                if (!t.is_basic[j] && std::abs(t.tab(i, j)) > kPivTol) {
                    col = j;
                    break;
                }
            }
            if (col >= 0) {
                const int leaving = t.basis[i];
                t.is_basic[leaving] = 0;
                t.basis[i] = col;
                t.is_basic[col] = 1;
                t.xb[i] = t.at_upper[col] ? t.ub[col] : 0.0;
                t.at_upper[col] = 0;
                t.pivot(i, col);
            }
        }
        for (int k = 0; k < n_art; ++k) t.ub[n + m + k] = 0.0;
    }

    Eigen::VectorXd cost = Eigen::VectorXd::Zero(ntot);
    cost.head(n) = p.c;
    res.status = run(t, cost, max_pivots, used);
    if (res.status == LpResult::Status::optimal) {
        res.x = t.solution(n);
        res.objective = p.c.dot(res.x);
    }
    return res;
}

}  // namespace fishrec
