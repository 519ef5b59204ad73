#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/dataset.hpp"
#include "tabllm/error.hpp"

namespace tabllm {

struct FoldPlan {
    size_t k = 0;
    int64_t seed = 0;
    std::vector<size_t> assignments;                 // length n, values in [0, k)
    std::vector<std::vector<bool>> validation_masks; // per fold, over the training portion

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["k"] = k;
        j["seed"] = seed;
        j["assignments"] = assignments;
        j["validation_masks"] = validation_masks;
        return j;
    }

    static FoldPlan from_json(const nlohmann::json& j) {
        FoldPlan p;
        p.k = j.at("k").get<size_t>();
        p.seed = j.at("seed").get<int64_t>();
        p.assignments = j.at("assignments").get<std::vector<size_t>>();
        p.validation_masks = j.at("validation_masks").get<std::vector<std::vector<bool>>>();
        return p;
    }
};

namespace detail {

// Self-contained Fisher-Yates so fold membership is reproducible across
// standard library implementations.
inline void deterministic_shuffle(std::vector<size_t>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

// Picks `total` positions from `pool` (grouped by class), proportional per
// class with largest-remainder rounding. Returns selected positions.
inline std::vector<size_t> stratified_pick(const std::vector<size_t>& pool,
                                           const std::vector<size_t>& labels_of_pool,
                                           size_t num_classes, size_t total,
                                           std::mt19937_64& rng) {
    std::vector<std::vector<size_t>> by_class(num_classes);
    for (size_t i = 0; i < pool.size(); ++i) by_class[labels_of_pool[i]].push_back(pool[i]);
    for (auto& g : by_class) deterministic_shuffle(g, rng);

    std::vector<size_t> take(num_classes, 0);
    std::vector<std::pair<double, size_t>> remainders;
    size_t assigned = 0;
    for (size_t c = 0; c < num_classes; ++c) {
        double exact = static_cast<double>(by_class[c].size()) * total / pool.size();
        take[c] = static_cast<size_t>(exact);
        assigned += take[c];
        remainders.push_back({exact - static_cast<double>(take[c]), c});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (size_t r = 0; assigned < total && r < remainders.size(); ++r) {
        size_t c = remainders[r].second;
        if (take[c] < by_class[c].size()) {
            ++take[c];
            ++assigned;
        }
    }
    // Classes can run short when total exceeds proportional availability.
    for (size_t c = 0; assigned < total && c < num_classes; ++c) {
        while (take[c] < by_class[c].size() && assigned < total) {
            ++take[c];
            ++assigned;
        }
    }
    std::vector<size_t> picked;
    for (size_t c = 0; c < num_classes; ++c)
        picked.insert(picked.end(), by_class[c].begin(), by_class[c].begin() + take[c]);
    return picked;
}

}  // namespace detail

// Stratified k-fold assignment plus a stratified one-eighth validation slice
// (rounded up) of each fold's training portion.
inline FoldPlan make_folds(const TabularDataset& dataset, size_t k, int64_t seed) {
    const size_t n = dataset.size();
    const size_t num_classes = dataset.schema.num_classes();
    if (k < 2) fail(errc::bad_config, "k must be at least 2");

    std::vector<std::vector<size_t>> by_class(num_classes);
    for (size_t i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);
    for (size_t c = 0; c < num_classes; ++c)
        if (!by_class[c].empty() && by_class[c].size() < k)
            fail(errc::too_few_samples, "class '" + dataset.schema.class_names[c] + "' has " +
                                            std::to_string(by_class[c].size()) +
                                            " samples, fewer than k=" + std::to_string(k));

    std::mt19937_64 rng(static_cast<uint64_t>(seed));
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(n, 0);

    // Deal a single class-ordered stream round-robin: per-class counts per fold
    // stay within 1 of proportional, and overall fold sizes stay within 1.
    size_t cursor = 0;
    for (size_t c = 0; c < num_classes; ++c) {
        auto members = by_class[c];
        detail::deterministic_shuffle(members, rng);
        for (size_t idx : members) plan.assignments[idx] = cursor++ % k;
    }

    for (size_t f = 0; f < k; ++f) {
        std::vector<size_t> train_positions;  // positions into the training portion
        std::vector<size_t> train_labels;
        for (size_t i = 0; i < n; ++i) {
            if (plan.assignments[i] != f) {
                train_positions.push_back(train_positions.size());
                train_labels.push_back(dataset.labels[i]);
            }
        }
        const size_t train_size = train_positions.size();
        const size_t val_size = (train_size + 7) / 8;  // ceil(train/8)
        std::mt19937_64 fold_rng(static_cast<uint64_t>(seed) * 1000003ull + f + 1);
        auto picked = detail::stratified_pick(train_positions, train_labels, num_classes,
                                              val_size, fold_rng);
        std::vector<bool> mask(train_size, false);
        for (size_t p : picked) mask[p] = true;
        plan.validation_masks.push_back(std::move(mask));
    }
    return plan;
}

struct FoldSplit {
    TabularDataset train;
    TabularDataset validation;
    TabularDataset test;
    std::vector<size_t> train_indices;
    std::vector<size_t> validation_indices;
    std::vector<size_t> test_indices;
};

inline FoldSplit split_fold(const TabularDataset& dataset, const FoldPlan& plan,
                            size_t fold_index) {
    if (fold_index >= plan.k) fail(errc::index_out_of_range, "fold index out of range");
    if (plan.assignments.size() != dataset.size())
        fail(errc::shape_mismatch, "plan built for a different dataset size");

    FoldSplit split;
    const auto& mask = plan.validation_masks.at(fold_index);
    size_t train_pos = 0;
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (plan.assignments[i] == fold_index) {
            split.test_indices.push_back(i);
        } else {
            if (mask.at(train_pos)) split.validation_indices.push_back(i);
            else split.train_indices.push_back(i);
            ++train_pos;
        }
    }
    split.train = dataset.subset(split.train_indices);
    split.validation = dataset.subset(split.validation_indices);
    split.test = dataset.subset(split.test_indices);
    return split;
}

inline void save_fold_plan(const FoldPlan& plan, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot write " + path);
    out << plan.to_json().dump(1) << '\n';
}

}  // namespace tabllm
