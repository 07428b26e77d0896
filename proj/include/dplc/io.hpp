#pragma once

// CSV datasets and JSON persistence for networks and fitted models.

#include <dplc/estimator.hpp>

#include <json.hpp>

#include <string>
#include <vector>

namespace dplc {

/// Dataset with column names; x columns carry the "x_" prefix, z columns "z_".
struct LabeledDataset {
    SurvivalDatasetd data;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;
    bool has_outcome = true;
};

struct CsvSchema {
    bool require_outcome = true;
    // When set, x/z columns must match these names exactly (in any order) and
    // are returned in this order.
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;
    bool match_names = false;
};

/// Throws InputError with line/column context for any malformed content.
LabeledDataset read_dataset_csv(const std::string& path, const CsvSchema& schema = {});
LabeledDataset parse_dataset_csv(const std::string& text, const CsvSchema& schema = {});

void write_dataset_csv(const std::string& path, const LabeledDataset& dataset);

/// Shortest text that reads back to the same double (at most 17 significant digits).
std::string format_double(double v);

nlohmann::json network_to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

nlohmann::json fit_config_to_json(const FitConfig& cfg);

struct ModelBundle {
    FittedModel model;
    std::vector<std::string> x_names;
    std::vector<std::string> z_names;
    FitConfig config;
};

nlohmann::json model_to_json(const ModelBundle& bundle);
ModelBundle model_from_json(const nlohmann::json& j);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

} // namespace dplc
