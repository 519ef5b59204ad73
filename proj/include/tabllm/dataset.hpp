#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/csv.hpp"
#include "tabllm/error.hpp"

namespace tabllm {

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
    std::string name;
    std::string description;
    FeatureKind kind = FeatureKind::numeric;
    std::optional<std::string> unit;
    std::optional<std::vector<std::string>> categories;
};

struct DatasetSchema {
    std::string dataset_name;
    std::string task_description;
    std::string target_column;
    std::vector<std::string> class_names;
    std::vector<FeatureSpec> features;

    size_t num_classes() const { return class_names.size(); }
    size_t num_features() const { return features.size(); }

    size_t class_index(const std::string& name) const {
        for (size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == name) return i;
        fail(errc::unknown_class, "label '" + name + "' not in class_names");
    }
};

// A cell is either a numeric value or a category token, per FeatureSpec.kind.
using Cell = std::variant<double, std::string>;

struct TabularDataset {
    DatasetSchema schema;
    std::vector<std::vector<Cell>> rows;   // n x m
    std::vector<size_t> labels;            // class indices in [0, C)

    size_t size() const { return rows.size(); }

    TabularDataset subset(const std::vector<size_t>& indices) const {
        TabularDataset out;
        out.schema = schema;
        out.rows.reserve(indices.size());
        out.labels.reserve(indices.size());
        for (size_t i : indices) {
            out.rows.push_back(rows.at(i));
            out.labels.push_back(labels.at(i));
        }
        return out;
    }
};

namespace detail {

inline void validate_schema(const DatasetSchema& s) {
    if (s.class_names.size() < 2) fail(errc::malformed_schema, "need at least 2 class names");
    if (s.features.empty()) fail(errc::malformed_schema, "need at least 1 feature");
    std::set<std::string> class_set(s.class_names.begin(), s.class_names.end());
    if (class_set.size() != s.class_names.size())
        fail(errc::malformed_schema, "duplicate class names");
    std::set<std::string> feature_names;
    for (const auto& f : s.features) {
        if (f.name.empty()) fail(errc::malformed_schema, "empty feature name");
        if (!feature_names.insert(f.name).second)
            fail(errc::malformed_schema, "duplicate feature name '" + f.name + "'");
        if (f.name == s.target_column)
            fail(errc::malformed_schema, "target_column '" + s.target_column + "' listed among features");
        if (f.kind == FeatureKind::categorical) {
            if (!f.categories || f.categories->empty())
                fail(errc::malformed_schema, "categorical feature '" + f.name + "' needs categories");
            std::set<std::string> cats(f.categories->begin(), f.categories->end());
            if (cats.size() != f.categories->size())
                fail(errc::malformed_schema, "duplicate categories in '" + f.name + "'");
        } else if (f.categories) {
            fail(errc::malformed_schema, "numeric feature '" + f.name + "' must not declare categories");
        }
    }
}

inline double parse_numeric_cell(const std::string& text, const std::string& column) {
    const char* first = text.data();
    const char* last = first + text.size();
    // std::from_chars rejects leading '+' and surrounding spaces; values in the
    // supported CSVs are plain decimal literals.
    double value = 0;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        fail(errc::type_mismatch, "non-numeric value '" + text + "' in numeric column '" + column + "'");
    return value;
}

}  // namespace detail

inline DatasetSchema parse_schema(const nlohmann::json& j) {
    if (!j.is_object()) fail(errc::malformed_schema, "schema root must be a JSON object");
    static const std::set<std::string> allowed_top = {
        "dataset_name", "task_description", "target_column", "class_names", "features"};
    for (const auto& [key, _] : j.items())
        if (!allowed_top.count(key)) fail(errc::malformed_schema, "unknown schema key '" + key + "'");
    for (const auto& key : allowed_top)
        if (!j.contains(key)) fail(errc::malformed_schema, "missing schema key '" + key + "'");

    DatasetSchema s;
    try {
        s.dataset_name = j.at("dataset_name").get<std::string>();
        s.task_description = j.at("task_description").get<std::string>();
        s.target_column = j.at("target_column").get<std::string>();
        s.class_names = j.at("class_names").get<std::vector<std::string>>();
        static const std::set<std::string> allowed_feat = {"name", "description", "kind", "unit",
                                                           "categories"};
        for (const auto& jf : j.at("features")) {
            for (const auto& [key, _] : jf.items())
                if (!allowed_feat.count(key))
                    fail(errc::malformed_schema, "unknown feature key '" + key + "'");
            FeatureSpec f;
            f.name = jf.at("name").get<std::string>();
            f.description = jf.at("description").get<std::string>();
            std::string kind = jf.at("kind").get<std::string>();
            if (kind == "numeric") f.kind = FeatureKind::numeric;
            else if (kind == "categorical") f.kind = FeatureKind::categorical;
            else fail(errc::malformed_schema, "unknown feature kind '" + kind + "'");
            if (jf.contains("unit")) f.unit = jf.at("unit").get<std::string>();
            if (jf.contains("categories"))
                f.categories = jf.at("categories").get<std::vector<std::string>>();
            s.features.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(errc::malformed_schema, e.what());
    }
    detail::validate_schema(s);
    return s;
}

inline DatasetSchema load_schema(const std::string& schema_path) {
    std::ifstream in(schema_path);
    if (!in) fail(errc::io_failure, "cannot open " + schema_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::malformed_schema, e.what());
    }
    return parse_schema(j);
}

// Loads a CSV against its schema sidecar. The schema is authoritative: column
// order follows the schema and extra CSV columns are ignored.
inline TabularDataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
    DatasetSchema schema = load_schema(schema_path);
    auto table = csv::parse_file(csv_path);
    if (table.empty()) fail(errc::empty_dataset, csv_path + " has no header row");

    const auto& header = table.front();
    std::unordered_map<std::string, size_t> col_of;
    for (size_t i = 0; i < header.size(); ++i) col_of.emplace(header[i], i);

    std::vector<size_t> feature_cols;
    for (const auto& f : schema.features) {
        auto it = col_of.find(f.name);
        if (it == col_of.end())
            fail(errc::missing_column, "schema column '" + f.name + "' absent from CSV header");
        feature_cols.push_back(it->second);
    }
    auto target_it = col_of.find(schema.target_column);
    if (target_it == col_of.end())
        fail(errc::missing_column, "target column '" + schema.target_column + "' absent from CSV header");
    const size_t target_col = target_it->second;

    TabularDataset ds;
    ds.schema = schema;
    for (size_t r = 1; r < table.size(); ++r) {
        const auto& raw = table[r];
        if (raw.size() == 1 && raw[0].empty()) continue;  // trailing blank line
        if (raw.size() != header.size())
            fail(errc::malformed_csv, "row " + std::to_string(r) + " has " +
                                          std::to_string(raw.size()) + " fields, header has " +
                                          std::to_string(header.size()));
        std::vector<Cell> row;
        row.reserve(schema.features.size());
        for (size_t fi = 0; fi < schema.features.size(); ++fi) {
            const auto& f = schema.features[fi];
            const std::string& text = raw[feature_cols[fi]];
            if (f.kind == FeatureKind::numeric) {
                row.emplace_back(detail::parse_numeric_cell(text, f.name));
            } else {
                if (std::find(f.categories->begin(), f.categories->end(), text) ==
                    f.categories->end())
                    fail(errc::unknown_category,
                         "value '" + text + "' not a declared category of '" + f.name + "'");
                row.emplace_back(text);
            }
        }
        ds.rows.push_back(std::move(row));
        ds.labels.push_back(schema.class_index(raw[target_col]));
    }
    if (ds.rows.empty()) fail(errc::empty_dataset, csv_path + " has a header but no data rows");
    return ds;
}

}  // namespace tabllm
