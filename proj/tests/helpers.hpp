#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "tabllm/bpe.hpp"
#include "tabllm/dataset.hpp"

namespace testutil {

inline std::string source_dir() { return TABLLM_SOURCE_DIR; }

inline std::string asset(const std::string& rel) { return source_dir() + "/" + rel; }

inline const tabllm::BpeVocabulary& gpt2_vocab() {
    static const tabllm::BpeVocabulary vocab =
        tabllm::load_bpe(asset("assets/gpt2/vocab.json"), asset("assets/gpt2/merges.txt"));
    return vocab;
}

inline tabllm::TabularDataset load_asset_dataset(const std::string& name) {
    return tabllm::load_dataset(asset("assets/datasets/" + name + ".csv"),
                                asset("assets/datasets/" + name + ".schema.json"));
}

// Unique scratch path, fresh across runs so leftover files cannot leak into
// assertions about directory contents.
inline std::string temp_path(const std::string& stem) {
    static int counter = 0;
    static const long long run_tag =
        std::chrono::steady_clock::now().time_since_epoch().count();
    auto dir = std::filesystem::temp_directory_path() /
               ("tabllm-tests-" + std::to_string(run_tag));
    std::filesystem::create_directories(dir);
    return (dir / (stem + "-" + std::to_string(counter++))).string();
}

inline std::string write_temp_file(const std::string& stem, const std::string& contents) {
    std::string path = temp_path(stem);
    std::ofstream out(path);
    out << contents;
    return path;
}

// Two-feature toy schema used across tests.
inline tabllm::DatasetSchema toy_schema() {
    tabllm::DatasetSchema s;
    s.dataset_name = "toy";
    s.task_description = "Predict diabetes.";
    s.target_column = "Outcome";
    s.class_names = {"no", "yes"};
    tabllm::FeatureSpec age;
    age.name = "Age";
    age.description = "Age of the person";
    age.kind = tabllm::FeatureKind::numeric;
    age.unit = "years";
    tabllm::FeatureSpec sex;
    sex.name = "Sex";
    sex.description = "Sex of the person";
    sex.kind = tabllm::FeatureKind::categorical;
    sex.categories = std::vector<std::string>{"male", "female"};
    s.features = {age, sex};
    return s;
}

inline tabllm::TabularDataset toy_dataset(size_t n) {
    tabllm::TabularDataset d;
    d.schema = toy_schema();
    for (size_t i = 0; i < n; ++i) {
        double age = 20.0 + static_cast<double>(i % 50);
        std::string sex = i % 3 == 0 ? "female" : "male";
        d.rows.push_back({tabllm::Cell{age}, tabllm::Cell{sex}});
        d.labels.push_back(i % 2);
    }
    return d;
}

}  // namespace testutil
