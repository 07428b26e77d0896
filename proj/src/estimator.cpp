#include <dplc/estimator.hpp>
#include <dplc/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dplc {

void FitConfig::validate() const
{
    scad.validate();
    adam.validate();
    if (!(outer_tol > 0.0)) throw InputError("fit: outer tolerance must be positive");
    if (max_outer < 1) throw InputError("fit: max_outer must be at least 1");
    if (!(cd.tol > 0.0) || cd.max_sweeps < 1) throw InputError("fit: invalid coordinate descent settings");
}

Eigen::VectorXd FittedModel::g_values(const Eigen::MatrixXd& z) const
{
    if (!net) return Eigen::VectorXd::Zero(z.rows());
    return forward(*net, z, Mode::eval);
}

namespace {

double safe_c_index(const Eigen::VectorXd& risk, const SurvivalDatasetd& data)
{
    try {
        return c_index(risk, data.times, data.status);
    } catch (const InputError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

std::vector<Index> support_of(const Eigen::VectorXd& beta)
{
    std::vector<Index> s;
    for (Index j = 0; j < beta.size(); ++j)
        if (beta(j) != 0.0) s.push_back(j);
    return s;
}

} // namespace

FittedModel fit(const SurvivalDatasetd& dataset, const FitConfig& cfg_in, const WarmStart* warm)
{
    dataset.validate();
    FitConfig cfg = cfg_in;
    cfg.validate();
    const Index n = dataset.size();
    const Index p = dataset.num_linear();
    if (p < 1) throw InputError("fit: need at least one penalized covariate");
    if (cfg.use_network) {
        if (dataset.num_nonparametric() < 1) throw InputError("fit: network requires at least one z covariate");
        if (cfg.arch.input_dim == 0) cfg.arch.input_dim = dataset.num_nonparametric();
        if (cfg.arch.input_dim != dataset.num_nonparametric())
            throw InputError("fit: architecture input dimension does not match z");
        cfg.arch.validate();
    }

    const RiskIndex index(dataset.times);
    const auto design = StandardizedDesign::from(dataset.x);
    Rng rng(cfg.seed);

    FittedModel model;
    model.lambda = cfg.scad.lambda;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (warm && warm->beta.size() == p) beta = warm->beta;

    std::optional<Network> net;
    if (cfg.use_network) {
        const bool reuse = warm && warm->net && warm->net->arch().input_dim == cfg.arch.input_dim &&
                           warm->net->arch().hidden == cfg.arch.hidden;
        if (reuse) {
            // Same parameters, possibly a different dropout rate.
            Network w(cfg.arch);
            w.set_parameters(warm->net->parameters());
            w.set_center_offset(warm->net->center_offset());
            net = std::move(w);
        } else {
            net = center(init_network(cfg.arch, cfg.seed), dataset.z);
        }
    }

    Eigen::VectorXd g = net ? forward(*net, dataset.z, Mode::eval) : Eigen::VectorXd::Zero(n);
    auto& diag = model.diagnostics;

    for (int k = 1; k <= cfg.max_outer; ++k) {
        try {
            Eigen::VectorXd g_new = g;
            if (net) {
                const Eigen::VectorXd xi = dataset.x * beta;
                auto step = adam_fit(std::move(*net), dataset.z, xi, dataset.status, index, cfg.adam, rng);
                net = std::move(step.net);
                g_new = forward(*net, dataset.z, Mode::eval);
            }
            const auto cd = cd_fit(design, dataset.status, index, g_new, beta, cfg.scad, cfg.cd);
            const double change = (design.to_standardized(cd.beta) - design.to_standardized(beta)).norm() +
                                  std::sqrt((g_new - g).squaredNorm() / static_cast<double>(n));
            beta = cd.beta;
            g = std::move(g_new);
            diag.cd_sweeps.push_back(cd.sweeps);
            diag.loss_trace.push_back(penalized_loss(design, dataset.status, index, g, beta, cfg.scad));
            if (!std::isfinite(diag.loss_trace.back())) throw NumericalError("non-finite penalized loss");
            diag.outer_iterations = k;
            if (change <= cfg.outer_tol || !net) {
                diag.converged = change <= cfg.outer_tol || !net;
                break;
            }
        } catch (const NumericalError& e) {
            throw NumericalError("outer iteration " + std::to_string(k) + ": " + e.what());
        }
    }

    model.beta = beta;
    model.net = std::move(net);
    model.support = support_of(beta);
    const Eigen::VectorXd eta = dataset.x * beta + g;
    diag.neg_loglik = cox_derivatives(eta, dataset.status, index, false, false).loss;
    diag.bic = bic_value(-diag.neg_loglik, n, static_cast<Index>(model.support.size()));
    diag.train_c_index = safe_c_index(predict_eta(model, dataset.x, dataset.z), dataset);
    return model;
}

Eigen::VectorXd predict_eta(const FittedModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z)
{
    if (x.cols() != model.beta.size()) throw InputError("predict: x has wrong number of columns");
    if (model.net && z.cols() != model.net->arch().input_dim) throw InputError("predict: z has wrong number of columns");
    if (x.rows() != z.rows()) throw InputError("predict: x and z row counts differ");
    return x * model.beta + model.g_values(z);
}

double bic_value(double loglik, Index n, Index support_size)
{
    return -2.0 * static_cast<double>(n) * loglik + std::log(static_cast<double>(n)) * static_cast<double>(support_size);
}

double bic(const FittedModel& model, const SurvivalDatasetd& dataset)
{
    const RiskIndex index(dataset.times);
    const Eigen::VectorXd eta = predict_eta(model, dataset.x, dataset.z);
    const double q = cox_derivatives(eta, dataset.status, index, false, false).loss;
    return bic_value(-q, dataset.size(), static_cast<Index>(model.support.size()));
}

std::vector<double> log_grid(double lo, double hi, int count)
{
    if (!(lo > 0.0) || !(hi >= lo) || count < 1) throw InputError("log_grid: need 0 < lo <= hi and count >= 1");
    std::vector<double> grid(static_cast<std::size_t>(count));
    if (count == 1) {
        grid[0] = lo;
        return grid;
    }
    const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(count - 1);
    for (int k = 0; k < count; ++k) grid[static_cast<std::size_t>(k)] = std::exp(std::log(lo) + step * k);
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

LambdaPath tune_lambda(const SurvivalDatasetd& dataset, const std::vector<double>& lambda_grid, const FitConfig& cfg)
{
    if (lambda_grid.empty()) throw InputError("tune_lambda: empty lambda grid");
    if (!std::is_sorted(lambda_grid.begin(), lambda_grid.end()))
        throw InputError("tune_lambda: lambda grid must be ascending");

    LambdaPath path;
    std::optional<WarmStart> warm;
    double best_bic = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
        FitConfig c = cfg;
        c.scad.lambda = lambda_grid[k];
        FittedModel model = fit(dataset, c, warm ? &*warm : nullptr);

        LambdaPathEntry entry;
        entry.lambda = lambda_grid[k];
        entry.beta = model.beta;
        entry.bic = model.diagnostics.bic;
        entry.neg_loglik = model.diagnostics.neg_loglik;
        entry.support_size = static_cast<Index>(model.support.size());
        path.entries.push_back(entry);

        warm = WarmStart{model.beta, model.net};
        if (entry.bic <= best_bic) {
            best_bic = entry.bic;
            path.best_index = k;
            path.best_lambda = entry.lambda;
            path.best_model = std::move(model);
        }
    }
    return path;
}

Split stratified_split(const Eigen::VectorXi& status, double train_fraction, Rng& rng)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InputError("split: fraction must lie in (0, 1)");
    Split split;
    for (const int stratum : {1, 0}) {
        std::vector<Index> members;
        for (Index i = 0; i < status.size(); ++i)
            if (status(i) == stratum) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
        split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

ArchitectureChoice tune_architecture(const SurvivalDatasetd& dataset, const ArchGrid& grid, const FitConfig& cfg,
                                     ArchCriterion criterion, double validation_fraction)
{
    if (grid.size() == 0) throw InputError("tune_architecture: empty grid");

    SurvivalDatasetd fit_data = dataset;
    SurvivalDatasetd valid_data;
    if (criterion == ArchCriterion::validation) {
        Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
        const auto split = stratified_split(dataset.status, 1.0 - validation_fraction, rng);
        fit_data = dataset.subset(split.train);
        valid_data = dataset.subset(split.test);
    }

    std::vector<Index> depths = grid.depths;
    std::vector<Index> widths = grid.widths;
    std::sort(depths.begin(), depths.end());
    std::sort(widths.begin(), widths.end());

    ArchitectureChoice choice;
    choice.score = std::numeric_limits<double>::infinity();
    for (const Index depth : depths) {
        for (const Index width : widths) {
            if (depth == 0 && width != widths.front()) continue;  // width is irrelevant without hidden layers
            for (const double dropout : grid.dropouts) {
                for (const double lr : grid.learning_rates) {
                    FitConfig c = cfg;
                    c.use_network = true;
                    c.arch.input_dim = dataset.num_nonparametric();
                    c.arch.hidden.assign(static_cast<std::size_t>(depth), width);
                    c.arch.dropout = dropout;
                    c.adam.learning_rate = lr;
                    const FittedModel model = fit(fit_data, c);

                    double score = 0;
                    if (criterion == ArchCriterion::validation) {
                        const RiskIndex vindex(valid_data.times);
                        const Eigen::VectorXd eta = predict_eta(model, valid_data.x, valid_data.z);
                        score = cox_derivatives(eta, valid_data.status, vindex, false, false).loss;
                    } else {
                        score = model.diagnostics.bic;
                    }
                    choice.evaluated.push_back({c.arch, lr, score});
                    // scores within rounding of the incumbent count as ties; the incumbent is smaller
                    const bool first = choice.evaluated.size() == 1;
                    if (first || score < choice.score - 1e-12 * std::max(1.0, std::abs(choice.score))) {
                        choice.score = score;
                        choice.arch = c.arch;
                        choice.learning_rate = lr;
                    }
                }
            }
        }
    }
    return choice;
}

TunedFit tune_and_fit(const SurvivalDatasetd& dataset, const TuningPlan& plan, const FitConfig& cfg)
{
    TunedFit out;
    out.config = cfg;
    if (cfg.use_network && plan.arch_grid && plan.arch_grid->size() > 1) {
        const LambdaPath pilot = tune_lambda(dataset, plan.lambda_grid, cfg);
        FitConfig at_lambda = cfg;
        at_lambda.scad.lambda = pilot.best_lambda;
        auto choice = tune_architecture(dataset, *plan.arch_grid, at_lambda, plan.arch_criterion);
        out.config.arch = choice.arch;
        out.config.adam.learning_rate = choice.learning_rate;
        out.architecture = std::move(choice);
    }
    out.path = tune_lambda(dataset, plan.lambda_grid, out.config);
    out.config.scad.lambda = out.path.best_lambda;
    if (out.config.use_network && out.config.arch.input_dim == 0)
        out.config.arch.input_dim = dataset.num_nonparametric();
    return out;
}

} // namespace dplc
