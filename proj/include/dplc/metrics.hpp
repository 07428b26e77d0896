#pragma once

// Evaluation metrics: Harrell's concordance and support-recovery counts.

#include <dplc/errors.hpp>

#include <Eigen/Dense>

#include <vector>

namespace dplc {

using Eigen::Index;

/**
 * Harrell's C over comparable pairs {(i, j) : T_i < T_j, D_i = 1}. A pair is
 * concordant when risk_i > risk_j; tied risks count one half.
 */
double c_index(const Eigen::VectorXd& risk, const Eigen::VectorXd& times, const Eigen::VectorXi& status);

struct SelectionRow {
    Index selected = 0;
    Index fpn = 0;
    double fpr = 0;  // fraction, not percent
    Index fnn = 0;
    double fnr = 0;
};

SelectionRow selection_metrics(const std::vector<Index>& selected, const std::vector<Index>& truth, Index p);

struct Summary {
    double mean = 0;
    double se = 0;      // sample sd / sqrt(count)
    double median = 0;
    double iqr = 0;     // type-7 quantiles
    Index count = 0;
};

Summary summarize(std::vector<double> values);

} // namespace dplc
