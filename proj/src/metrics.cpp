#include <dplc/metrics.hpp>

#include <algorithm>
#include <cmath>

namespace dplc {

double c_index(const Eigen::VectorXd& risk, const Eigen::VectorXd& times, const Eigen::VectorXi& status)
{
    const Index n = risk.size();
    if (times.size() != n || status.size() != n) throw InputError("c_index: input sizes differ");
    if (n < 2) throw InputError("c_index: need at least two subjects");
    double concordant = 0;
    double comparable = 0;
    for (Index i = 0; i < n; ++i) {
        if (!status(i)) continue;
        for (Index j = 0; j < n; ++j) {
            if (!(times(i) < times(j))) continue;
            comparable += 1;
            if (risk(i) > risk(j)) concordant += 1;
            else if (risk(i) == risk(j)) concordant += 0.5;
        }
    }
    if (comparable == 0) throw InputError("no comparable pairs");
    return concordant / comparable;
}

SelectionRow selection_metrics(const std::vector<Index>& selected, const std::vector<Index>& truth, Index p)
{
    if (truth.empty()) throw InputError("selection metrics: empty true support leaves FNR undefined");
    std::vector<char> in_truth(static_cast<std::size_t>(p), 0), in_selected(static_cast<std::size_t>(p), 0);
    for (const Index j : truth) {
        if (j < 0 || j >= p) throw InputError("selection metrics: index out of range");
        in_truth[static_cast<std::size_t>(j)] = 1;
    }
    for (const Index j : selected) {
        if (j < 0 || j >= p) throw InputError("selection metrics: index out of range");
        in_selected[static_cast<std::size_t>(j)] = 1;
    }
    SelectionRow row;
    Index true_count = 0;
    for (std::size_t j = 0; j < in_truth.size(); ++j) {
        true_count += in_truth[j];
        row.selected += in_selected[j];
        if (in_selected[j] && !in_truth[j]) ++row.fpn;
        if (!in_selected[j] && in_truth[j]) ++row.fnn;
    }
    row.fpr = p > true_count ? static_cast<double>(row.fpn) / static_cast<double>(p - true_count) : 0.0;
    row.fnr = static_cast<double>(row.fnn) / static_cast<double>(true_count);
    return row;
}

namespace {
double quantile_sorted(const std::vector<double>& v, double prob)
{
    const double pos = prob * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}
} // namespace

Summary summarize(std::vector<double> values)
{
    Summary s;
    s.count = static_cast<Index>(values.size());
    if (values.empty()) return s;
    double sum = 0;
    for (const double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0;
        for (const double v : values) ss += (v - s.mean) * (v - s.mean);
        s.se = std::sqrt(ss / static_cast<double>(values.size() - 1)) / std::sqrt(static_cast<double>(values.size()));
    }
    std::sort(values.begin(), values.end());
    s.median = quantile_sorted(values, 0.5);
    s.iqr = quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
    return s;
}

} // namespace dplc
