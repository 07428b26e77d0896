#include <dplc/simulation.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace dplc {

void SimConfig::validate() const
{
    if (n < 4) throw InputError("simulation: n must be at least 4");
    if (p < 1) throw InputError("simulation: p must be positive");
    if (r < 1) throw InputError("simulation: r must be positive");
    if (s_beta < 0 || s_beta > p) throw InputError("simulation: s_beta must lie in [0, p]");
    if (!(rho >= 0.0 && rho < 1.0)) throw InputError("simulation: rho must lie in [0, 1)");
    if (!(target_censoring > 0.0 && target_censoring < 1.0))
        throw InputError("simulation: target censoring must lie in (0, 1)");
    if (!(mu > 0.0)) throw InputError("simulation: mu must be positive");
    if (!(beta_min >= 0.0 && beta_max >= beta_min)) throw InputError("simulation: need 0 <= beta_min <= beta_max");
    if (g0 == G0Kind::nonlinear && r < 8) throw InputError("simulation: nonlinear g0 needs r >= 8");
}

Covariates gen_covariates(const SimConfig& cfg, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    const double own = std::sqrt(1.0 - cfg.rho);
    const double shared = std::sqrt(cfg.rho);
    Covariates out{Eigen::MatrixXd(cfg.n, cfg.p), Eigen::MatrixXd(cfg.n, cfg.r)};
    for (Index i = 0; i < cfg.n; ++i) {
        const double e0 = normal(rng);
        for (Index j = 0; j < cfg.p; ++j) out.x(i, j) = own * normal(rng) + shared * e0;
        for (Index j = 0; j < cfg.r; ++j) out.z(i, j) = own * normal(rng) + shared * e0;
    }
    return out;
}

G0Value g0_eval(const Eigen::Ref<const Eigen::VectorXd>& z, G0Kind kind, const Eigen::VectorXd& alpha)
{
    G0Value out;
    switch (kind) {
    case G0Kind::zero:
        return out;
    case G0Kind::linear:
        if (alpha.size() != z.size()) throw InputError("g0: alpha and z sizes differ");
        out.value = alpha.dot(z);
        return out;
    case G0Kind::nonlinear: {
        if (z.size() < 8) throw InputError("g0: nonlinear form needs 8 covariates");
        double diff = z(1) - z(2);
        if (diff == 0.0) {
            diff = 1e-12;
            out.perturbed = true;
        }
        const double quad = z(5) - z(6) + z(7);
        out.value = 0.68 * std::exp(z(0)) - 0.45 * std::log(diff * diff) + 0.32 * std::sin(z(3) * z(4)) -
                    0.45 * quad * quad - 0.32;
        return out;
    }
    }
    return out;
}

Eigen::VectorXd gen_survival(const Eigen::VectorXd& eta0, double mu, Rng& rng)
{
    if (!(mu > 0.0)) throw InputError("gen_survival: mu must be positive");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd u(eta0.size());
    for (Index i = 0; i < eta0.size(); ++i) {
        const double draw = 1.0 - unif(rng);  // (0, 1]
        u(i) = -std::log(draw) / (mu * std::exp(eta0(i)));
        if (!(u(i) > 0.0)) u(i) = std::numeric_limits<double>::min();
    }
    return u;
}

double expected_censoring_rate(const Eigen::VectorXd& event_times, double bound)
{
    if (!(bound > 0.0)) return 1.0;
    double acc = 0;
    for (Index i = 0; i < event_times.size(); ++i) acc += std::min(event_times(i) / bound, 1.0);
    return acc / static_cast<double>(event_times.size());
}

double calibrate_censoring(const Eigen::VectorXd& event_times, double target_rate)
{
    if (event_times.size() == 0) throw InputError("calibrate_censoring: no event times");
    if (!(target_rate > 0.0 && target_rate < 1.0))
        throw InputError("calibrate_censoring: target censoring rate unreachable (must lie in (0, 1))");
    if (!(event_times.minCoeff() > 0.0) || !event_times.allFinite())
        throw InputError("calibrate_censoring: event times must be finite and positive");

    // Rate is 1 for bound <= min U, decreasing and continuous above it.
    double lo = event_times.minCoeff();
    double hi = std::max(event_times.maxCoeff(), event_times.mean() / target_rate);
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (expected_censoring_rate(event_times, mid) > target_rate) lo = mid;
        else hi = mid;
        if (hi / lo - 1.0 < 1e-14) break;
    }
    return std::sqrt(lo * hi);
}

SimulatedData simulate(const SimConfig& cfg, Rng& rng)
{
    cfg.validate();
    SimulatedData out;
    auto cov = gen_covariates(cfg, rng);

    out.beta0 = Eigen::VectorXd::Zero(cfg.p);
    std::vector<Index> idx(static_cast<std::size_t>(cfg.p));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    out.support.assign(idx.begin(), idx.begin() + cfg.s_beta);
    std::sort(out.support.begin(), out.support.end());
    std::uniform_real_distribution<double> magnitude(cfg.beta_min, cfg.beta_max);
    std::bernoulli_distribution positive(0.5);
    for (const Index j : out.support) {
        const double m = magnitude(rng);
        out.beta0(j) = positive(rng) ? m : -m;
    }
    out.alpha0 = Eigen::VectorXd::Zero(cfg.r);
    if (cfg.g0 == G0Kind::linear) {
        std::uniform_real_distribution<double> coef(-cfg.alpha_bound, cfg.alpha_bound);
        for (Index j = 0; j < cfg.r; ++j) out.alpha0(j) = coef(rng);
    }

    Eigen::VectorXd eta0 = cov.x * out.beta0;
    for (Index i = 0; i < cfg.n; ++i) {
        const auto g = g0_eval(cov.z.row(i).transpose(), cfg.g0, out.alpha0);
        eta0(i) += g.value;
        out.perturbed += g.perturbed ? 1 : 0;
    }

    const Eigen::VectorXd u = gen_survival(eta0, cfg.mu, rng);
    out.censoring_bound = calibrate_censoring(u, cfg.target_censoring);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    auto& d = out.data;
    d.times.resize(cfg.n);
    d.status.resize(cfg.n);
    Index censored = 0;
    for (Index i = 0; i < cfg.n; ++i) {
        const double c = out.censoring_bound * (1.0 - unif(rng));  // (0, bound]
        d.status(i) = u(i) <= c ? 1 : 0;
        d.times(i) = std::min(u(i), c);
        censored += 1 - d.status(i);
    }
    d.x = std::move(cov.x);
    d.z = std::move(cov.z);
    out.censoring_rate = static_cast<double>(censored) / static_cast<double>(cfg.n);
    return out;
}

std::string method_name(Method m)
{
    return m == Method::dplc ? "dplc" : "cox_scad";
}

Method method_from_name(const std::string& name)
{
    if (name == "dplc") return Method::dplc;
    if (name == "cox_scad") return Method::cox_scad;
    throw InputError("unknown method '" + name + "' (expected dplc or cox_scad)");
}

Rng replicate_rng(std::uint64_t master_seed, int replicate)
{
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffULL),
                      static_cast<std::uint32_t>(master_seed >> 32), static_cast<std::uint32_t>(replicate),
                      0x5eedu};
    return Rng(seq);
}

namespace {

std::string arch_label(const FitConfig& cfg)
{
    if (!cfg.use_network) return "none";
    if (cfg.arch.hidden.empty()) return "linear";
    std::string s;
    for (std::size_t k = 0; k < cfg.arch.hidden.size(); ++k) {
        if (k) s += 'x';
        s += std::to_string(cfg.arch.hidden[k]);
    }
    return s;
}

std::vector<ReplicateResult> run_replicate(const SimConfig& sim, const ExperimentConfig& exp, int rep,
                                           std::uint64_t seed)
{
    Rng rng = replicate_rng(seed, rep);
    std::vector<ReplicateResult> rows;
    SimulatedData data;
    Split split;
    std::uint64_t fit_seed = 0;
    try {
        data = simulate(sim, rng);
        split = stratified_split(data.data.status, exp.train_fraction, rng);
        fit_seed = rng();
    } catch (const std::exception& e) {
        for (const Method m : exp.methods) {
            ReplicateResult row;
            row.replicate = rep;
            row.method = m;
            row.ok = false;
            row.error = e.what();
            rows.push_back(row);
        }
        return rows;
    }
    const auto train = data.data.subset(split.train);
    const auto test = data.data.subset(split.test);

    for (const Method m : exp.methods) {
        ReplicateResult row;
        row.replicate = rep;
        row.method = m;
        row.censoring_rate = data.censoring_rate;
        row.train_size = train.size();
        row.test_size = test.size();
        row.has_truth = !data.support.empty();
        try {
            FitConfig cfg = exp.fit;
            cfg.seed = fit_seed;
            cfg.use_network = m == Method::dplc;
            const TunedFit tuned = tune_and_fit(train, exp.tuning, cfg);
            const FittedModel& model = tuned.path.best_model;
            row.lambda = tuned.path.best_lambda;
            row.architecture = arch_label(tuned.config);
            row.learning_rate = cfg.use_network ? tuned.config.adam.learning_rate : 0.0;
            row.dropout = cfg.use_network ? tuned.config.arch.dropout : 0.0;
            const Eigen::VectorXd eta = predict_eta(model, test.x, test.z);
            row.c_index = c_index(eta, test.times, test.status);
            if (row.has_truth) {
                row.selection = selection_metrics(model.support, data.support, sim.p);
            } else {
                row.selection.selected = static_cast<Index>(model.support.size());
                row.selection.fpn = row.selection.selected;
                row.selection.fpr = static_cast<double>(row.selection.fpn) / static_cast<double>(sim.p);
            }
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace

ExperimentReport run_experiment(const SimConfig& sim, const ExperimentConfig& exp, int replicates,
                                std::uint64_t seed,
                                const std::function<void(const std::vector<ReplicateResult>&)>& on_replicate)
{
    sim.validate();
    if (replicates < 1) throw InputError("run_experiment: replicates must be at least 1");
    if (exp.methods.empty()) throw InputError("run_experiment: no methods");

    std::vector<std::vector<ReplicateResult>> results(static_cast<std::size_t>(replicates));
    std::vector<char> done(static_cast<std::size_t>(replicates), 0);
    std::mutex mutex;
    int next_emit = 0;
    std::atomic<int> next_job{0};

    auto worker = [&]() {
        for (int rep = next_job++; rep < replicates; rep = next_job++) {
            auto rows = run_replicate(sim, exp, rep, seed);
            std::lock_guard<std::mutex> lock(mutex);
            results[static_cast<std::size_t>(rep)] = std::move(rows);
            done[static_cast<std::size_t>(rep)] = 1;
            while (next_emit < replicates && done[static_cast<std::size_t>(next_emit)]) {
                if (on_replicate) on_replicate(results[static_cast<std::size_t>(next_emit)]);
                ++next_emit;
            }
        }
    };
    const int threads = std::max(1, std::min(exp.threads, replicates));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    ExperimentReport report;
    std::vector<double> censoring;
    for (auto& rows : results) {
        if (!rows.empty() && rows.front().ok) censoring.push_back(rows.front().censoring_rate);
        for (auto& row : rows) report.rows.push_back(std::move(row));
    }
    report.censoring = summarize(censoring);

    for (const Method m : exp.methods) {
        MethodSummary s;
        s.method = m;
        std::vector<double> c, sel, fpn, fpr, fnn, fnr;
        for (const auto& row : report.rows) {
            if (row.method != m) continue;
            if (!row.ok) {
                ++s.failures;
                continue;
            }
            c.push_back(row.c_index);
            sel.push_back(static_cast<double>(row.selection.selected));
            fpn.push_back(static_cast<double>(row.selection.fpn));
            fpr.push_back(row.selection.fpr);
            fnn.push_back(static_cast<double>(row.selection.fnn));
            fnr.push_back(row.selection.fnr);
        }
        s.c_index = summarize(c);
        s.selected = summarize(sel);
        s.fpn = summarize(fpn);
        s.fpr = summarize(fpr);
        s.fnn = summarize(fnn);
        s.fnr = summarize(fnr);
        report.summaries.push_back(s);
    }
    return report;
}

} // namespace dplc
