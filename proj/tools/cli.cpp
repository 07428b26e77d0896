#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace dplc::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> logger()
{
    static const auto log = [] {
        auto l = spdlog::stderr_logger_mt("dplc");
        l->set_pattern("[%l] %v");
        const char* env = std::getenv("DPLC_LOG");
        l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
        return l;
    }();
    return log;
}

// Walks one JSON object, recording which keys were consumed so leftovers can
// be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path))
    {
        if (!obj_.is_object()) throw InputError(fmt::format("config: '{}' must be an object", path_));
    }

    template <typename T>
    bool read(const char* key, T& out)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        if (it == obj_.end()) return false;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw InputError(fmt::format("config: '{}.{}' has the wrong type", path_, key));
        }
        return true;
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        const auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    void finish() const
    {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key)) throw InputError(fmt::format("config: unknown key '{}.{}'", path_, key));
    }

private:
    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

G0Kind g0_from_name(const std::string& s)
{
    if (s == "linear") return G0Kind::linear;
    if (s == "nonlinear") return G0Kind::nonlinear;
    if (s == "zero") return G0Kind::zero;
    throw InputError("config: 'simulation.g0' must be linear, nonlinear or zero");
}

std::string g0_name(G0Kind k)
{
    switch (k) {
    case G0Kind::linear: return "linear";
    case G0Kind::nonlinear: return "nonlinear";
    case G0Kind::zero: return "zero";
    }
    return "linear";
}

void validate_grid(const std::vector<double>& grid, const char* what, bool positive = true)
{
    if (grid.empty()) throw InputError(fmt::format("config: '{}' must not be empty", what));
    for (const double v : grid)
        if (!std::isfinite(v) || (positive && !(v > 0.0)) || (!positive && v < 0.0))
            throw InputError(fmt::format("config: '{}' contains an invalid value", what));
}

void validate(RunConfig& cfg)
{
    cfg.fit.validate();
    cfg.simulation.validate();
    validate_grid(cfg.tuning.lambda_grid, "fit.lambda_grid");
    if (!std::is_sorted(cfg.tuning.lambda_grid.begin(), cfg.tuning.lambda_grid.end()))
        throw InputError("config: 'fit.lambda_grid' must be ascending");
    if (cfg.tuning.arch_grid) {
        const auto& g = *cfg.tuning.arch_grid;
        if (g.depths.empty() || g.widths.empty()) throw InputError("config: architecture grids must not be empty");
        for (const Index d : g.depths)
            if (d < 0) throw InputError("config: 'fit.depth_grid' entries must be nonnegative");
        for (const Index w : g.widths)
            if (w < 1) throw InputError("config: 'fit.width_grid' entries must be positive");
        validate_grid(g.dropouts, "fit.dropout_grid", false);
        for (const double d : g.dropouts)
            if (d >= 1.0) throw InputError("config: 'fit.dropout_grid' entries must be below 1");
        validate_grid(g.learning_rates, "fit.lr_grid");
    }
    NetworkArch probe = cfg.fit.arch;
    probe.input_dim = 1;
    probe.validate();
    if (cfg.replicates < 1) throw InputError("config: 'simulation.replicates' must be at least 1");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw InputError("config: 'benchmark.train_fraction' must lie in (0, 1)");
    if (cfg.methods.empty()) throw InputError("config: 'benchmark.methods' must not be empty");
}

} // namespace

RunConfig default_run_config()
{
    RunConfig cfg;
    cfg.fit.arch.hidden = {8};
    cfg.fit.arch.dropout = 0.3;
    cfg.fit.adam.learning_rate = 0.01;
    cfg.tuning.lambda_grid = log_grid(0.05, 5.0, 25);
    return cfg;
}

RunConfig parse_run_config(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        throw InputError(fmt::format("config: line {}, column {}: invalid JSON", line, col));
    }

    RunConfig cfg = default_run_config();
    ObjectReader top(root, "$");

    if (const json* f = top.child("fit")) {
        ObjectReader r(*f, "$.fit");
        if (const json* grid = r.child("lambda_grid")) {
            if (grid->is_array()) {
                try {
                    cfg.tuning.lambda_grid = grid->get<std::vector<double>>();
                } catch (const json::exception&) {
                    throw InputError("config: '$.fit.lambda_grid' must be an array of numbers");
                }
            } else {
                ObjectReader g(*grid, "$.fit.lambda_grid");
                double lo = 0.05, hi = 5.0;
                int count = 25;
                g.read("min", lo);
                g.read("max", hi);
                g.read("count", count);
                g.finish();
                cfg.tuning.lambda_grid = log_grid(lo, hi, count);
            }
        }
        r.read("a", cfg.fit.scad.a);
        r.read("hidden", cfg.fit.arch.hidden);
        r.read("dropout", cfg.fit.arch.dropout);
        r.read("learning_rate", cfg.fit.adam.learning_rate);
        r.read("r1", cfg.fit.adam.r1);
        r.read("r2", cfg.fit.adam.r2);
        r.read("eps0", cfg.fit.adam.eps0);
        r.read("inner_steps", cfg.fit.adam.inner_steps);
        r.read("adam_tol", cfg.fit.adam.tol);
        r.read("early_stopping", cfg.fit.adam.keep_best);
        r.read("cd_tol", cfg.fit.cd.tol);
        std::string rule;
        if (r.read("threshold_rule", rule)) {
            if (rule == "exact") cfg.fit.cd.rule = ThresholdRule::exact;
            else if (rule == "rescaled") cfg.fit.cd.rule = ThresholdRule::rescaled;
            else throw InputError("config: '$.fit.threshold_rule' must be exact or rescaled");
        }
        r.read("max_sweeps", cfg.fit.cd.max_sweeps);
        r.read("outer_tol", cfg.fit.outer_tol);
        r.read("max_outer", cfg.fit.max_outer);
        bool tune = false;
        r.read("tune_architecture", tune);
        ArchGrid grid{{1, 2}, {4, 8}, {0.3, 0.5}, {0.005, 0.02}};
        const bool custom = r.read("depth_grid", grid.depths) | r.read("width_grid", grid.widths) |
                            r.read("dropout_grid", grid.dropouts) | r.read("lr_grid", grid.learning_rates);
        if (tune) cfg.tuning.arch_grid = grid;
        else if (custom) throw InputError("config: architecture grids given but 'fit.tune_architecture' is false");
        std::string criterion = "validation";
        if (r.read("arch_criterion", criterion)) {
            if (criterion == "validation") cfg.tuning.arch_criterion = ArchCriterion::validation;
            else if (criterion == "training_bic") cfg.tuning.arch_criterion = ArchCriterion::training_bic;
            else throw InputError("config: '$.fit.arch_criterion' must be validation or training_bic");
        }
        r.finish();
    }

    if (const json* s = top.child("simulation")) {
        ObjectReader r(*s, "$.simulation");
        auto& sim = cfg.simulation;
        r.read("n", sim.n);
        r.read("p", sim.p);
        r.read("r", sim.r);
        r.read("s_beta", sim.s_beta);
        r.read("rho", sim.rho);
        std::string g0;
        if (r.read("g0", g0)) sim.g0 = g0_from_name(g0);
        r.read("target_censoring", sim.target_censoring);
        r.read("mu", sim.mu);
        r.read("beta_min", sim.beta_min);
        r.read("beta_max", sim.beta_max);
        r.read("alpha_bound", sim.alpha_bound);
        r.read("replicates", cfg.replicates);
        r.finish();
    }

    if (const json* b = top.child("benchmark")) {
        ObjectReader r(*b, "$.benchmark");
        std::vector<std::string> methods;
        if (r.read("methods", methods)) {
            cfg.methods.clear();
            for (const auto& m : methods) cfg.methods.push_back(method_from_name(m));
        }
        r.read("train_fraction", cfg.train_fraction);
        r.finish();
    }
    top.finish();
    validate(cfg);
    return cfg;
}

json run_config_to_json(const RunConfig& cfg)
{
    json fit = {{"lambda_grid", cfg.tuning.lambda_grid},
                {"a", cfg.fit.scad.a},
                {"hidden", cfg.fit.arch.hidden},
                {"dropout", cfg.fit.arch.dropout},
                {"learning_rate", cfg.fit.adam.learning_rate},
                {"r1", cfg.fit.adam.r1},
                {"r2", cfg.fit.adam.r2},
                {"eps0", cfg.fit.adam.eps0},
                {"inner_steps", cfg.fit.adam.inner_steps},
                {"adam_tol", cfg.fit.adam.tol},
                {"early_stopping", cfg.fit.adam.keep_best},
                {"cd_tol", cfg.fit.cd.tol},
                {"threshold_rule", cfg.fit.cd.rule == ThresholdRule::exact ? "exact" : "rescaled"},
                {"max_sweeps", cfg.fit.cd.max_sweeps},
                {"outer_tol", cfg.fit.outer_tol},
                {"max_outer", cfg.fit.max_outer},
                {"tune_architecture", cfg.tuning.arch_grid.has_value()},
                {"arch_criterion",
                 cfg.tuning.arch_criterion == ArchCriterion::validation ? "validation" : "training_bic"}};
    if (cfg.tuning.arch_grid) {
        fit["depth_grid"] = cfg.tuning.arch_grid->depths;
        fit["width_grid"] = cfg.tuning.arch_grid->widths;
        fit["dropout_grid"] = cfg.tuning.arch_grid->dropouts;
        fit["lr_grid"] = cfg.tuning.arch_grid->learning_rates;
    }
    const auto& s = cfg.simulation;
    json sim = {{"n", s.n},
                {"p", s.p},
                {"r", s.r},
                {"s_beta", s.s_beta},
                {"rho", s.rho},
                {"g0", g0_name(s.g0)},
                {"target_censoring", s.target_censoring},
                {"mu", s.mu},
                {"beta_min", s.beta_min},
                {"beta_max", s.beta_max},
                {"alpha_bound", s.alpha_bound},
                {"replicates", cfg.replicates}};
    std::vector<std::string> methods;
    for (const Method m : cfg.methods) methods.push_back(method_name(m));
    return {{"fit", fit},
            {"simulation", sim},
            {"benchmark", {{"methods", methods}, {"train_fraction", cfg.train_fraction}}}};
}

namespace {

std::vector<std::string> split(const std::string& s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double to_double(const std::string& s, const char* what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw InputError(fmt::format("{}: cannot parse '{}'", what, s));
    }
}

Index to_index(const std::string& s, const char* what)
{
    const double v = to_double(s, what);
    if (v != std::floor(v)) throw InputError(fmt::format("{}: '{}' is not an integer", what, s));
    return static_cast<Index>(v);
}

} // namespace

std::vector<double> parse_lambda_grid(const std::string& text)
{
    if (text.find(':') != std::string::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw InputError("--lambda-grid: expected lo:hi:count");
        return log_grid(to_double(parts[0], "--lambda-grid"), to_double(parts[1], "--lambda-grid"),
                        static_cast<int>(to_index(parts[2], "--lambda-grid")));
    }
    std::vector<double> grid;
    for (const auto& p : split(text, ',')) grid.push_back(to_double(p, "--lambda-grid"));
    std::sort(grid.begin(), grid.end());
    validate_grid(grid, "--lambda-grid");
    return grid;
}

std::pair<std::vector<Index>, std::vector<Index>> parse_arch_grid(const std::string& text)
{
    const auto parts = split(text, 'x');
    if (parts.size() != 2) throw InputError("--arch-grid: expected DEPTHSxWIDTHS, e.g. 1,2x4,8");
    std::vector<Index> depths, widths;
    for (const auto& d : split(parts[0], ',')) depths.push_back(to_index(d, "--arch-grid"));
    for (const auto& w : split(parts[1], ',')) widths.push_back(to_index(w, "--arch-grid"));
    for (const Index d : depths)
        if (d < 0) throw InputError("--arch-grid: depths must be nonnegative");
    for (const Index w : widths)
        if (w < 1) throw InputError("--arch-grid: widths must be positive");
    return {depths, widths};
}

namespace {

RunConfig load_config(const std::string& path)
{
    if (path.empty()) return default_run_config();
    return parse_run_config(read_text(path));
}

void apply_grid_flags(RunConfig& cfg, const std::string& lambda_grid, const std::string& arch_grid)
{
    if (!lambda_grid.empty()) cfg.tuning.lambda_grid = parse_lambda_grid(lambda_grid);
    if (!arch_grid.empty()) {
        auto [depths, widths] = parse_arch_grid(arch_grid);
        ArchGrid grid = cfg.tuning.arch_grid.value_or(
            ArchGrid{{}, {}, {cfg.fit.arch.dropout}, {cfg.fit.adam.learning_rate}});
        grid.depths = std::move(depths);
        grid.widths = std::move(widths);
        cfg.tuning.arch_grid = grid;
    }
}

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string path_in(const std::string& dir, const char* name)
{
    return (fs::path(dir) / name).string();
}

template <typename F>
int guarded(F&& body)
{
    try {
        return body();
    } catch (const InputError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kInputError;
    } catch (const NumericalError& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kNumericalError;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kFailure;
    }
}

std::string cell(const Summary& s, double scale = 1.0)
{
    return fmt::format("{:.2f} ({:.2f})", s.mean * scale, s.se * scale);
}

} // namespace

std::string selection_table(const ModelBundle& b)
{
    std::string out = fmt::format("{:<24} {:>14} {:>14}\n", "feature", "beta", "hazard_ratio");
    for (const Index j : b.model.support) {
        const double beta = b.model.beta(j);
        out += fmt::format("{:<24} {:>14.6f} {:>14.4f}\n", b.x_names[static_cast<std::size_t>(j)], beta,
                           std::exp(beta));
    }
    out += fmt::format("\nselected {} of {} features, lambda = {}, BIC = {:.4f}\n", b.model.support.size(),
                       b.x_names.size(), format_double(b.model.lambda), b.model.diagnostics.bic);
    return out;
}

int cmd_fit(const FitArgs& args)
{
    return guarded([&] {
        RunConfig cfg = load_config(args.config);
        apply_grid_flags(cfg, args.lambda_grid, args.arch_grid);
        validate(cfg);
        const LabeledDataset data = read_dataset_csv(args.data);
        data.data.validate();
        ensure_dir(args.out);

        FitConfig fit_cfg = cfg.fit;
        fit_cfg.seed = args.seed;
        logger()->info("fitting n={} p={} r={} over {} lambda values", data.data.size(), data.data.num_linear(),
                       data.data.num_nonparametric(), cfg.tuning.lambda_grid.size());
        TunedFit tuned = tune_and_fit(data.data, cfg.tuning, fit_cfg);

        ModelBundle bundle{tuned.path.best_model, data.x_names, data.z_names, tuned.config};
        write_text(path_in(args.out, "model.json"), model_to_json(bundle).dump(2) + "\n");
        write_text(path_in(args.out, "selection.txt"), selection_table(bundle));

        std::string path_csv = "lambda,bic,neg_loglik,support_size,selected\n";
        for (std::size_t k = 0; k < tuned.path.entries.size(); ++k) {
            const auto& e = tuned.path.entries[k];
            path_csv += fmt::format("{},{},{},{},{}\n", format_double(e.lambda), format_double(e.bic),
                                    format_double(e.neg_loglik), e.support_size,
                                    k == tuned.path.best_index ? 1 : 0);
        }
        write_text(path_in(args.out, "bic_path.csv"), path_csv);

        if (tuned.architecture) {
            std::string arch_csv = "hidden,dropout,learning_rate,score\n";
            for (const auto& c : tuned.architecture->evaluated) {
                std::string hidden;
                for (std::size_t k = 0; k < c.arch.hidden.size(); ++k)
                    hidden += (k ? "x" : "") + std::to_string(c.arch.hidden[k]);
                arch_csv += fmt::format("{},{},{},{}\n", hidden.empty() ? "linear" : hidden,
                                        format_double(c.arch.dropout), format_double(c.learning_rate),
                                        format_double(c.score));
            }
            write_text(path_in(args.out, "architecture_search.csv"), arch_csv);
        }
        logger()->info("selected lambda {} with {} features", tuned.path.best_lambda,
                       tuned.path.best_model.support.size());
        return static_cast<int>(kOk);
    });
}

int cmd_predict(const PredictArgs& args)
{
    return guarded([&] {
        const ModelBundle bundle = model_from_json([&] {
            try {
                return json::parse(read_text(args.model));
            } catch (const json::parse_error& e) {
                throw InputError(std::string("model file: ") + e.what());
            }
        }());
        CsvSchema schema;
        schema.require_outcome = false;
        schema.match_names = true;
        schema.x_names = bundle.x_names;
        schema.z_names = bundle.z_names;
        const LabeledDataset data = read_dataset_csv(args.data, schema);
        const Eigen::VectorXd eta = predict_eta(bundle.model, data.data.x, data.data.z);

        std::string csv = "row,eta\n";
        for (Index i = 0; i < eta.size(); ++i) csv += fmt::format("{},{}\n", i, format_double(eta(i)));
        const fs::path out(args.out);
        if (out.has_parent_path()) ensure_dir(out.parent_path().string());
        write_text(args.out, csv);

        if (data.has_outcome) {
            json metrics = {{"n", eta.size()}};
            try {
                metrics["c_index"] = c_index(eta, data.data.times, data.data.status);
            } catch (const InputError&) {
                metrics["c_index"] = nullptr;
            }
            fs::path mpath = out;
            mpath.replace_extension(".metrics.json");
            write_text(mpath.string(), metrics.dump(2) + "\n");
        }
        return static_cast<int>(kOk);
    });
}

int cmd_simulate(const SimulateArgs& args)
{
    return guarded([&] {
        const RunConfig cfg = load_config(args.config);
        ensure_dir(args.out);
        Rng rng = replicate_rng(args.seed, 0);
        const SimulatedData sim = simulate(cfg.simulation, rng);

        LabeledDataset out;
        out.data = sim.data;
        for (Index j = 0; j < sim.data.num_linear(); ++j) out.x_names.push_back(fmt::format("x_{}", j + 1));
        for (Index j = 0; j < sim.data.num_nonparametric(); ++j) out.z_names.push_back(fmt::format("z_{}", j + 1));
        write_dataset_csv(path_in(args.out, "data.csv"), out);

        json truth = {{"beta0", std::vector<double>(sim.beta0.data(), sim.beta0.data() + sim.beta0.size())},
                      {"alpha0", std::vector<double>(sim.alpha0.data(), sim.alpha0.data() + sim.alpha0.size())},
                      {"support", sim.support},
                      {"censoring_bound", sim.censoring_bound},
                      {"censoring_rate", sim.censoring_rate},
                      {"perturbed", sim.perturbed},
                      {"config", run_config_to_json(cfg)["simulation"]}};
        write_text(path_in(args.out, "truth.json"), truth.dump(2) + "\n");
        return static_cast<int>(kOk);
    });
}

int cmd_benchmark(const BenchmarkArgs& args)
{
    return guarded([&] {
        RunConfig cfg = load_config(args.config);
        apply_grid_flags(cfg, args.lambda_grid, args.arch_grid);
        validate(cfg);
        if (args.threads < 1) throw InputError("--threads must be at least 1");
        ensure_dir(args.out);

        ExperimentConfig exp;
        exp.fit = cfg.fit;
        exp.tuning = cfg.tuning;
        exp.methods = cfg.methods;
        exp.train_fraction = cfg.train_fraction;
        exp.threads = args.threads;

        std::ofstream rows_out(path_in(args.out, "replicates.csv"), std::ios::binary);
        if (!rows_out) throw InputError("cannot write replicates.csv");
        rows_out << "replicate,method,ok,c_index,selected,fpn,fpr,fnn,fnr,lambda,architecture,learning_rate,"
                    "dropout,censoring_rate,train_size,test_size,error\n"
                 << std::flush;

        const auto report = run_experiment(
            cfg.simulation, exp, cfg.replicates, args.seed, [&](const std::vector<ReplicateResult>& rows) {
                for (const auto& r : rows) {
                    std::string err = r.error;
                    std::replace(err.begin(), err.end(), ',', ';');
                    std::replace(err.begin(), err.end(), '\n', ' ');
                    rows_out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.replicate,
                                            method_name(r.method), r.ok ? 1 : 0, format_double(r.c_index),
                                            r.selection.selected, r.selection.fpn, format_double(r.selection.fpr),
                                            r.selection.fnn, format_double(r.selection.fnr), format_double(r.lambda),
                                            r.architecture, format_double(r.learning_rate),
                                            format_double(r.dropout), format_double(r.censoring_rate),
                                            r.train_size, r.test_size, err);
                    logger()->info("replicate {} {}: c-index {:.3f}, {} selected", r.replicate,
                                   method_name(r.method), r.c_index, r.selection.selected);
                }
                rows_out.flush();
            });

        std::string longcsv = "method,replicate,c_index\n";
        for (const auto& r : report.rows)
            if (r.ok) longcsv += fmt::format("{},{},{}\n", method_name(r.method), r.replicate, format_double(r.c_index));
        write_text(path_in(args.out, "cindex_long.csv"), longcsv);

        std::string table = "Method,Selected Features,FPN,FPR (%),FNN,FNR (%)\n";
        json summaries = json::array();
        for (const auto& s : report.summaries) {
            table += fmt::format("{},{},{},{},{},{}\n", method_name(s.method), cell(s.selected), cell(s.fpn),
                                 cell(s.fpr, 100.0), cell(s.fnn), cell(s.fnr, 100.0));
            auto js = [](const Summary& x) {
                return json{{"mean", x.mean}, {"se", x.se}, {"median", x.median}, {"iqr", x.iqr}, {"count", x.count}};
            };
            summaries.push_back({{"method", method_name(s.method)},
                                 {"c_index", js(s.c_index)},
                                 {"selected", js(s.selected)},
                                 {"fpn", js(s.fpn)},
                                 {"fpr", js(s.fpr)},
                                 {"fnn", js(s.fnn)},
                                 {"fnr", js(s.fnr)},
                                 {"failures", s.failures}});
        }
        write_text(path_in(args.out, "selection_summary.csv"), table);
        const json summary = {{"seed", args.seed},
                              {"replicates", cfg.replicates},
                              {"censoring", {{"mean", report.censoring.mean}, {"se", report.censoring.se}}},
                              {"methods", summaries},
                              {"config", run_config_to_json(cfg)}};
        write_text(path_in(args.out, "summary.json"), summary.dump(2) + "\n");

        int failures = 0;
        for (const auto& s : report.summaries) failures += s.failures;
        if (failures > 0) logger()->warn("{} replicate fits failed; see replicates.csv", failures);
        return static_cast<int>(kOk);
    });
}

int run(const std::vector<std::string>& args)
{
    CLI::App app{"Penalized deep partially linear Cox model"};
    app.require_subcommand(1);

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "Tune lambda (and optionally the network) and fit a model");
    fit_cmd->add_option("--data", fit.data, "Training CSV (time, status, x_*, z_*)")->required();
    fit_cmd->add_option("--config", fit.config, "JSON run configuration");
    fit_cmd->add_option("--out", fit.out, "Output directory")->required();
    fit_cmd->add_option("--seed", fit.seed, "Random seed");
    fit_cmd->add_option("--lambda-grid", fit.lambda_grid, "Comma list or lo:hi:count (log-spaced)");
    fit_cmd->add_option("--arch-grid", fit.arch_grid, "DEPTHSxWIDTHS, e.g. 1,2x4,8");
    int fit_threads = 1;
    fit_cmd->add_option("--threads", fit_threads, "Worker threads (fits are sequential)");

    PredictArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "Linear predictor for new data");
    predict_cmd->add_option("--model", predict.model, "model.json from fit")->required();
    predict_cmd->add_option("--data", predict.data, "CSV with the training x_*/z_* columns")->required();
    predict_cmd->add_option("--out", predict.out, "Output CSV")->required();

    SimulateArgs simulate;
    auto* sim_cmd = app.add_subcommand("simulate", "Write one simulated dataset and its truth");
    sim_cmd->add_option("--config", simulate.config, "JSON run configuration");
    sim_cmd->add_option("--out", simulate.out, "Output directory")->required();
    sim_cmd->add_option("--seed", simulate.seed, "Random seed");

    BenchmarkArgs bench;
    auto* bench_cmd = app.add_subcommand("benchmark", "Replicated simulation experiment");
    bench_cmd->add_option("--config", bench.config, "JSON run configuration");
    bench_cmd->add_option("--out", bench.out, "Output directory")->required();
    bench_cmd->add_option("--seed", bench.seed, "Master random seed");
    bench_cmd->add_option("--threads", bench.threads, "Worker threads for replicates");
    bench_cmd->add_option("--lambda-grid", bench.lambda_grid, "Comma list or lo:hi:count (log-spaced)");
    bench_cmd->add_option("--arch-grid", bench.arch_grid, "DEPTHSxWIDTHS, e.g. 1,2x4,8");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kInputError;
    }

    if (*fit_cmd) return cmd_fit(fit);
    if (*predict_cmd) return cmd_predict(predict);
    if (*sim_cmd) return cmd_simulate(simulate);
    return cmd_benchmark(bench);
}

} // namespace dplc::cli
