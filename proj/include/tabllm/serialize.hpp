#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/dataset.hpp"
#include "tabllm/error.hpp"

namespace tabllm {

struct SerializedSample {
    std::string text;
    size_t label = 0;
    size_t source_row = 0;
};

struct PromptTemplate {
    std::string task_header;
    std::string reasoning_instructions;
    std::string response_instructions;
    std::string metadata_block;
    std::string example_separator;

    static PromptTemplate defaults() {
        PromptTemplate t;
        t.task_header =
            "You are an expert assistant working on a tabular classification problem.\n"
            "Task: {task}";
        t.reasoning_instructions =
            "Think about how each feature tends to relate to the outcome, drawing on general "
            "knowledge and on the labeled examples below.";
        t.metadata_block = "Features:";
        t.response_instructions =
            "Respond with exactly one class name for each new case. Do not add any explanation.";
        t.example_separator = "\n\nHere is another labeled case for the same task.\n\n";
        return t;
    }

    static PromptTemplate from_json(const nlohmann::json& j) {
        PromptTemplate t = defaults();
        if (j.contains("task_header")) t.task_header = j.at("task_header").get<std::string>();
        if (j.contains("reasoning_instructions"))
            t.reasoning_instructions = j.at("reasoning_instructions").get<std::string>();
        if (j.contains("response_instructions"))
            t.response_instructions = j.at("response_instructions").get<std::string>();
        if (j.contains("metadata_block")) t.metadata_block = j.at("metadata_block").get<std::string>();
        if (j.contains("example_separator"))
            t.example_separator = j.at("example_separator").get<std::string>();
        return t;
    }

    static PromptTemplate from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) fail(errc::io_failure, "cannot open " + path);
        nlohmann::json j;
        in >> j;
        return from_json(j);
    }
};

struct TokenBudget {
    size_t prompt_limit = 15000;
    size_t reserved_output = 1385;

    void validate() const {
        if (prompt_limit <= reserved_output)
            fail(errc::bad_config, "prompt_limit must exceed reserved_output");
    }
};

// Shortest decimal representation that parses back to the same double,
// trailing zeros trimmed (42.0 renders as "42", 33.60 as "33.6").
inline std::string format_numeric(double value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

inline std::string render_cell(const Cell& cell, const FeatureSpec& spec) {
    if (spec.kind == FeatureKind::numeric) {
        const double* v = std::get_if<double>(&cell);
        if (!v) fail(errc::schema_violation, "categorical cell in numeric feature '" + spec.name + "'");
        return format_numeric(*v);
    }
    const std::string* s = std::get_if<std::string>(&cell);
    if (!s) fail(errc::schema_violation, "numeric cell in categorical feature '" + spec.name + "'");
    if (std::find(spec.categories->begin(), spec.categories->end(), *s) == spec.categories->end())
        fail(errc::schema_violation, "value '" + *s + "' not a category of '" + spec.name + "'");
    return *s;
}

// "Age is 25. Sex is male." -- one clause per feature, schema order.
inline std::string serialize_text(const std::vector<Cell>& row, const DatasetSchema& schema) {
    if (row.size() != schema.features.size())
        fail(errc::schema_violation, "row width does not match schema");
    std::string text;
    for (size_t i = 0; i < schema.features.size(); ++i) {
        if (i) text += ' ';
        text += schema.features[i].name;
        text += " is ";
        text += render_cell(row[i], schema.features[i]);
        text += '.';
    }
    return text;
}

inline SerializedSample serialize_row(const TabularDataset& dataset, size_t row_index) {
    SerializedSample s;
    s.text = serialize_text(dataset.rows.at(row_index), dataset.schema);
    s.label = dataset.labels.at(row_index);
    s.source_row = row_index;
    return s;
}

inline std::vector<SerializedSample> serialize_dataset(const TabularDataset& dataset) {
    std::vector<SerializedSample> out;
    out.reserve(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) out.push_back(serialize_row(dataset, i));
    return out;
}

// Transfer-learning prompt: the bare serialized row, optionally prefixed with
// the task description.
inline std::string build_transfer_prompt(const SerializedSample& sample,
                                         const DatasetSchema& schema, bool include_task) {
    if (!include_task) return sample.text;
    return schema.task_description + ' ' + sample.text;
}

inline std::string feature_metadata_line(const FeatureSpec& f) {
    std::string line = "- " + f.name + " (" +
                       (f.kind == FeatureKind::numeric ? "numeric" : "categorical") +
                       "): " + f.description;
    if (f.unit) line += ", unit: " + *f.unit;
    if (f.categories) {
        line += ", one of: ";
        for (size_t i = 0; i < f.categories->size(); ++i) {
            if (i) line += " / ";
            line += (*f.categories)[i];
        }
    }
    return line;
}

// Few-shot prompt with task header, reasoning/response instructions, feature
// metadata and labeled serialized examples.
inline std::string build_featllm_prompt(const DatasetSchema& schema,
                                        const std::vector<SerializedSample>& examples,
                                        const PromptTemplate& tmpl) {
    std::string head = tmpl.task_header;
    if (size_t pos = head.find("{task}"); pos != std::string::npos)
        head.replace(pos, 6, schema.task_description);

    std::string metadata = tmpl.metadata_block;
    for (const auto& f : schema.features) {
        metadata += '\n';
        metadata += feature_metadata_line(f);
    }

    std::string out = head + "\n\n" + tmpl.reasoning_instructions + "\n\n" + metadata + "\n\n" +
                      tmpl.response_instructions;
    for (size_t i = 0; i < examples.size(); ++i) {
        out += i == 0 ? "\n\n" : tmpl.example_separator;
        out += examples[i].text;
        out += "\nAnswer: ";
        out += schema.class_names.at(examples[i].label);
    }
    return out;
}

// Class-balanced candidate order: round-robin over classes, preserving row
// order within each class.
inline std::vector<SerializedSample> stratified_candidates(const TabularDataset& dataset) {
    const size_t num_classes = dataset.schema.num_classes();
    std::vector<std::vector<SerializedSample>> by_class(num_classes);
    for (size_t i = 0; i < dataset.size(); ++i)
        by_class[dataset.labels[i]].push_back(serialize_row(dataset, i));
    std::vector<SerializedSample> out;
    out.reserve(dataset.size());
    for (size_t round = 0; out.size() < dataset.size(); ++round)
        for (size_t c = 0; c < num_classes; ++c)
            if (round < by_class[c].size()) out.push_back(by_class[c][round]);
    return out;
}

// Largest shot count whose fully rendered prompt fits the budget. Probes via
// binary search with a full re-render each time, then verifies the boundary.
inline size_t max_shots(const DatasetSchema& schema,
                        const std::vector<SerializedSample>& candidates,
                        const TokenBudget& budget,
                        const std::function<size_t(const std::string&)>& tokenize,
                        const PromptTemplate& tmpl = PromptTemplate::defaults()) {
    budget.validate();
    auto cost = [&](size_t s) {
        std::vector<SerializedSample> head(candidates.begin(), candidates.begin() + s);
        return tokenize(build_featllm_prompt(schema, head, tmpl));
    };
    if (cost(0) > budget.prompt_limit)
        fail(errc::budget_too_small, "zero-shot prompt already exceeds the token limit");

    size_t lo = 0, hi = candidates.size();
    while (lo < hi) {
        size_t mid = lo + (hi - lo + 1) / 2;
        if (cost(mid) <= budget.prompt_limit) lo = mid;
        else hi = mid - 1;
    }
    // token counts are not strictly monotone in shot count across BPE
    // boundaries; verify and nudge linearly at the boundary
    while (lo > 0 && cost(lo) > budget.prompt_limit) --lo;
    while (lo < candidates.size() && cost(lo + 1) <= budget.prompt_limit) ++lo;
    return lo;
}

inline void export_corpus_jsonl(const std::vector<SerializedSample>& samples,
                                const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot write " + path);
    for (const auto& s : samples) {
        nlohmann::json j;
        j["text"] = s.text;
        j["label"] = s.label;
        j["source_row"] = s.source_row;
        out << j.dump() << '\n';
    }
}

}  // namespace tabllm
