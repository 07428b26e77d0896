#include <dplc/io.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace dplc {

using nlohmann::json;

std::string format_double(double v)
{
    return fmt::format("{}", v);
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw InputError("failed writing '" + path + "'");
}

std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                             : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

[[noreturn]] void fail_at(std::size_t line, std::size_t column, const std::string& msg)
{
    throw InputError(fmt::format("line {}, column {}: {}", line, column, msg));
}

double parse_cell(const std::string& cell, std::size_t line, std::size_t column, const std::string& name)
{
    if (cell.empty()) fail_at(line, column, "missing value in column '" + name + "'");
    double v = 0;
    const char* first = cell.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        fail_at(line, column, "cannot parse '" + cell + "' as a number in column '" + name + "'");
    if (!std::isfinite(v)) fail_at(line, column, "non-finite value in column '" + name + "'");
    return v;
}

} // namespace

LabeledDataset parse_dataset_csv(const std::string& text, const CsvSchema& schema)
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_line(line);
            break;
        }
    }
    if (header.empty()) throw InputError("line 1, column 1: missing header row");

    std::map<std::string, std::size_t> position;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].empty()) fail_at(line_no, c + 1, "empty column name");
        if (!position.emplace(header[c], c).second) fail_at(line_no, c + 1, "duplicate column '" + header[c] + "'");
    }
    const std::size_t header_line = line_no;

    LabeledDataset out;
    std::vector<std::size_t> x_cols, z_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c].rfind("x_", 0) == 0) {
            out.x_names.push_back(header[c]);
            x_cols.push_back(c);
        } else if (header[c].rfind("z_", 0) == 0) {
            out.z_names.push_back(header[c]);
            z_cols.push_back(c);
        } else if (header[c] != "time" && header[c] != "status") {
            fail_at(header_line, c + 1, "unexpected column '" + header[c] + "' (expected time, status, x_*, z_*)");
        }
    }

    const bool has_time = position.count("time") > 0;
    const bool has_status = position.count("status") > 0;
    if (schema.require_outcome) {
        if (!has_time) fail_at(header_line, 1, "missing required column 'time'");
        if (!has_status) fail_at(header_line, 1, "missing required column 'status'");
    } else if (has_time != has_status) {
        fail_at(header_line, 1, std::string("column '") + (has_time ? "status" : "time") +
                                    "' is required when '" + (has_time ? "time" : "status") + "' is present");
    }
    out.has_outcome = has_time && has_status;

    if (schema.match_names) {
        auto reorder = [&](const std::vector<std::string>& expected, std::vector<std::string>& names,
                           std::vector<std::size_t>& cols, const char* kind) {
            for (const auto& n : expected)
                if (!position.count(n)) fail_at(header_line, 1, "missing " + std::string(kind) + " column '" + n + "'");
            for (const auto& n : names)
                if (std::find(expected.begin(), expected.end(), n) == expected.end())
                    fail_at(header_line, position[n] + 1, "column '" + n + "' was not present at training time");
            names = expected;
            cols.clear();
            for (const auto& n : expected) cols.push_back(position[n]);
        };
        reorder(schema.x_names, out.x_names, x_cols, "penalized");
        reorder(schema.z_names, out.z_names, z_cols, "network");
    } else {
        if (x_cols.empty()) fail_at(header_line, 1, "need at least one x_ column");
        if (z_cols.empty()) fail_at(header_line, 1, "need at least one z_ column");
    }

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size())
            fail_at(line_no, std::min(cells.size(), header.size()) + 1,
                    fmt::format("expected {} cells, found {}", header.size(), cells.size()));
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) values[c] = parse_cell(cells[c], line_no, c + 1, header[c]);
        if (out.has_outcome) {
            const std::size_t tc = position["time"], sc = position["status"];
            if (!(values[tc] > 0.0)) fail_at(line_no, tc + 1, "time must be positive");
            if (values[sc] != 0.0 && values[sc] != 1.0) fail_at(line_no, sc + 1, "status must be 0 or 1");
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw InputError(fmt::format("line {}, column 1: no data rows", line_no + 1));

    const auto n = static_cast<Index>(rows.size());
    auto& d = out.data;
    d.times = Eigen::VectorXd::Ones(n);
    d.status = Eigen::VectorXi::Zero(n);
    d.x.resize(n, static_cast<Index>(x_cols.size()));
    d.z.resize(n, static_cast<Index>(z_cols.size()));
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (out.has_outcome) {
            d.times(i) = row[position["time"]];
            d.status(i) = static_cast<int>(row[position["status"]]);
        }
        for (std::size_t k = 0; k < x_cols.size(); ++k) d.x(i, static_cast<Index>(k)) = row[x_cols[k]];
        for (std::size_t k = 0; k < z_cols.size(); ++k) d.z(i, static_cast<Index>(k)) = row[z_cols[k]];
    }
    return out;
}

LabeledDataset read_dataset_csv(const std::string& path, const CsvSchema& schema)
{
    return parse_dataset_csv(read_text(path), schema);
}

void write_dataset_csv(const std::string& path, const LabeledDataset& ds)
{
    const auto& d = ds.data;
    std::string text = "time,status";
    for (const auto& n : ds.x_names) text += "," + n;
    for (const auto& n : ds.z_names) text += "," + n;
    text += "\n";
    for (Index i = 0; i < d.size(); ++i) {
        text += format_double(d.times(i)) + "," + std::to_string(d.status(i));
        for (Index j = 0; j < d.x.cols(); ++j) text += "," + format_double(d.x(i, j));
        for (Index j = 0; j < d.z.cols(); ++j) text += "," + format_double(d.z(i, j));
        text += "\n";
    }
    write_text(path, text);
}

json network_to_json(const Network& net)
{
    json layers = json::array();
    for (Index l = 0; l < net.num_layers(); ++l) {
        const auto& w = net.weight(l);
        std::vector<double> row_major;
        row_major.reserve(static_cast<std::size_t>(w.size()));
        for (Index r = 0; r < w.rows(); ++r)
            for (Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
        const auto& b = net.bias(l);
        layers.push_back({{"rows", w.rows()},
                          {"cols", w.cols()},
                          {"weights", row_major},
                          {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    return {{"format", "dplc-network"},
            {"version", 1},
            {"input_dim", net.arch().input_dim},
            {"hidden", net.arch().hidden},
            {"dropout", net.arch().dropout},
            {"layers", layers},
            {"center_offset", net.center_offset()}};
}

Network network_from_json(const json& j)
{
    try {
        if (j.at("format") != "dplc-network" || j.at("version") != 1)
            throw InputError("network: unsupported format or version");
        NetworkArch arch;
        arch.input_dim = j.at("input_dim").get<Index>();
        arch.hidden = j.at("hidden").get<std::vector<Index>>();
        arch.dropout = j.at("dropout").get<double>();
        Network net(arch);
        const auto& layers = j.at("layers");
        if (static_cast<Index>(layers.size()) != net.num_layers()) throw InputError("network: layer count mismatch");
        for (Index l = 0; l < net.num_layers(); ++l) {
            const auto& lj = layers.at(static_cast<std::size_t>(l));
            auto& w = net.weight(l);
            const auto weights = lj.at("weights").get<std::vector<double>>();
            const auto bias = lj.at("bias").get<std::vector<double>>();
            if (lj.at("rows").get<Index>() != w.rows() || lj.at("cols").get<Index>() != w.cols() ||
                static_cast<Index>(weights.size()) != w.size() || static_cast<Index>(bias.size()) != w.rows())
                throw InputError("network: layer shape mismatch");
            for (Index r = 0; r < w.rows(); ++r)
                for (Index c = 0; c < w.cols(); ++c) w(r, c) = weights[static_cast<std::size_t>(r * w.cols() + c)];
            net.bias(l) = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Index>(bias.size()));
        }
        net.set_center_offset(j.at("center_offset").get<double>());
        return net;
    } catch (const json::exception& e) {
        throw InputError(std::string("network: ") + e.what());
    }
}

json fit_config_to_json(const FitConfig& cfg)
{
    return {{"lambda", cfg.scad.lambda},
            {"a", cfg.scad.a},
            {"hidden", cfg.arch.hidden},
            {"dropout", cfg.arch.dropout},
            {"learning_rate", cfg.adam.learning_rate},
            {"r1", cfg.adam.r1},
            {"r2", cfg.adam.r2},
            {"eps0", cfg.adam.eps0},
            {"inner_steps", cfg.adam.inner_steps},
            {"adam_tol", cfg.adam.tol},
            {"early_stopping", cfg.adam.keep_best},
            {"cd_tol", cfg.cd.tol},
            {"threshold_rule", cfg.cd.rule == ThresholdRule::exact ? "exact" : "rescaled"},
            {"max_sweeps", cfg.cd.max_sweeps},
            {"outer_tol", cfg.outer_tol},
            {"max_outer", cfg.max_outer},
            {"use_network", cfg.use_network},
            {"seed", cfg.seed}};
}

namespace {

FitConfig fit_config_from_json(const json& j)
{
    FitConfig cfg;
    cfg.scad.lambda = j.at("lambda").get<double>();
    cfg.scad.a = j.at("a").get<double>();
    cfg.arch.hidden = j.at("hidden").get<std::vector<Index>>();
    cfg.arch.dropout = j.at("dropout").get<double>();
    cfg.adam.learning_rate = j.at("learning_rate").get<double>();
    cfg.adam.r1 = j.at("r1").get<double>();
    cfg.adam.r2 = j.at("r2").get<double>();
    cfg.adam.eps0 = j.at("eps0").get<double>();
    cfg.adam.inner_steps = j.at("inner_steps").get<int>();
    cfg.adam.tol = j.at("adam_tol").get<double>();
    cfg.adam.keep_best = j.at("early_stopping").get<bool>();
    cfg.cd.tol = j.at("cd_tol").get<double>();
    const auto rule = j.at("threshold_rule").get<std::string>();
    if (rule != "exact" && rule != "rescaled") throw InputError("model: unknown threshold_rule '" + rule + "'");
    cfg.cd.rule = rule == "exact" ? ThresholdRule::exact : ThresholdRule::rescaled;
    cfg.cd.max_sweeps = j.at("max_sweeps").get<int>();
    cfg.outer_tol = j.at("outer_tol").get<double>();
    cfg.max_outer = j.at("max_outer").get<int>();
    cfg.use_network = j.at("use_network").get<bool>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

json nan_to_null(double v)
{
    return std::isfinite(v) ? json(v) : json(nullptr);
}

} // namespace

json model_to_json(const ModelBundle& b)
{
    const auto& m = b.model;
    json beta = json::array();
    for (const Index j : m.support)
        beta.push_back({{"index", j}, {"name", b.x_names.at(static_cast<std::size_t>(j))}, {"value", m.beta(j)}});
    const auto& d = m.diagnostics;
    return {{"format", "dplc-model"},
            {"version", 1},
            {"x_names", b.x_names},
            {"z_names", b.z_names},
            {"p", m.beta.size()},
            {"lambda", m.lambda},
            {"beta", beta},
            {"network", m.net ? network_to_json(*m.net) : json(nullptr)},
            {"config", fit_config_to_json(b.config)},
            {"diagnostics",
             {{"loss_trace", d.loss_trace},
              {"cd_sweeps", d.cd_sweeps},
              {"outer_iterations", d.outer_iterations},
              {"converged", d.converged},
              {"neg_loglik", d.neg_loglik},
              {"bic", d.bic},
              {"train_c_index", nan_to_null(d.train_c_index)}}}};
}

ModelBundle model_from_json(const json& j)
{
    try {
        if (j.at("format") != "dplc-model" || j.at("version") != 1)
            throw InputError("model: unsupported format or version");
        ModelBundle b;
        b.x_names = j.at("x_names").get<std::vector<std::string>>();
        b.z_names = j.at("z_names").get<std::vector<std::string>>();
        auto& m = b.model;
        const auto p = j.at("p").get<Index>();
        if (p != static_cast<Index>(b.x_names.size())) throw InputError("model: p does not match x_names");
        m.lambda = j.at("lambda").get<double>();
        m.beta = Eigen::VectorXd::Zero(p);
        for (const auto& e : j.at("beta")) {
            const auto idx = e.at("index").get<Index>();
            if (idx < 0 || idx >= p) throw InputError("model: coefficient index out of range");
            m.beta(idx) = e.at("value").get<double>();
            if (m.beta(idx) != 0.0) m.support.push_back(idx);
        }
        std::sort(m.support.begin(), m.support.end());
        if (!j.at("network").is_null()) m.net = network_from_json(j.at("network"));
        b.config = fit_config_from_json(j.at("config"));
        const auto& d = j.at("diagnostics");
        m.diagnostics.loss_trace = d.at("loss_trace").get<std::vector<double>>();
        m.diagnostics.cd_sweeps = d.at("cd_sweeps").get<std::vector<int>>();
        m.diagnostics.outer_iterations = d.at("outer_iterations").get<int>();
        m.diagnostics.converged = d.at("converged").get<bool>();
        m.diagnostics.neg_loglik = d.at("neg_loglik").get<double>();
        m.diagnostics.bic = d.at("bic").get<double>();
        m.diagnostics.train_c_index = d.at("train_c_index").is_null()
            ? std::numeric_limits<double>::quiet_NaN()
            : d.at("train_c_index").get<double>();
        return b;
    } catch (const json::exception& e) {
        throw InputError(std::string("model: ") + e.what());
    }
}

} // namespace dplc
