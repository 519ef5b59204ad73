#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "tabllm/error.hpp"

namespace tabllm {

// Mann-Whitney AUC with tie handling: average ranks over tied score groups,
// AUC = (rank sum of positives - n_pos(n_pos+1)/2) / (n_pos * n_neg).
inline double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) fail(errc::shape_mismatch, "scores/labels length mismatch");
    const size_t n = scores.size();
    size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) fail(errc::bad_label, "labels must be 0 or 1");
        n_pos += static_cast<size_t>(y);
    }
    const size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) fail(errc::single_class, "both classes must be present");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    double pos_rank_sum = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1) / 2.0) / (np * nn);
}

// O(n^2) pairwise reference: (#concordant + 0.5 * #tied) / (#pos * #neg).
inline double roc_auc_bruteforce(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
    if (scores.size() != labels.size()) fail(errc::shape_mismatch, "scores/labels length mismatch");
    double num = 0;
    size_t pairs = 0;
    for (size_t p = 0; p < scores.size(); ++p) {
        if (labels[p] != 1) continue;
        for (size_t q = 0; q < scores.size(); ++q) {
            if (labels[q] != 0) continue;
            ++pairs;
            if (scores[p] > scores[q]) num += 1.0;
            else if (scores[p] == scores[q]) num += 0.5;
        }
    }
    if (pairs == 0) fail(errc::single_class, "both classes must be present");
    return num / static_cast<double>(pairs);
}

// Macro one-vs-rest average over the classes present in labels.
inline double multiclass_auc(const std::vector<std::vector<double>>& probabilities,
                             const std::vector<size_t>& labels) {
    if (probabilities.size() != labels.size())
        fail(errc::shape_mismatch, "probabilities/labels length mismatch");
    if (probabilities.empty()) fail(errc::single_class, "empty input");
    const size_t C = probabilities.front().size();
    std::vector<size_t> counts(C, 0);
    for (size_t y : labels) {
        if (y >= C) fail(errc::bad_label, "label out of range");
        ++counts[y];
    }
    size_t present = 0;
    for (size_t c = 0; c < C; ++c) present += counts[c] > 0;
    if (present < 2) fail(errc::single_class, "need at least two classes present");

    if (C == 2) {
        std::vector<double> scores;
        std::vector<int> bin;
        for (size_t i = 0; i < labels.size(); ++i) {
            scores.push_back(probabilities[i][1]);
            bin.push_back(labels[i] == 1 ? 1 : 0);
        }
        return roc_auc(scores, bin);
    }

    double total = 0;
    size_t used = 0;
    for (size_t c = 0; c < C; ++c) {
        if (counts[c] == 0 || counts[c] == labels.size()) continue;
        std::vector<double> scores;
        std::vector<int> bin;
        for (size_t i = 0; i < labels.size(); ++i) {
            scores.push_back(probabilities[i][c]);
            bin.push_back(labels[i] == c ? 1 : 0);
        }
        total += roc_auc(scores, bin);
        ++used;
    }
    return total / static_cast<double>(used);
}

struct MethodRank {
    std::string method;
    double mean_rank = 0;
    double std_rank = 0;  // population std over datasets
};

// Per dataset, rank methods by descending AUC with averaged ranks on ties,
// then aggregate mean and population std across datasets.
inline std::vector<MethodRank> rank_methods(
    const std::vector<std::string>& methods, const std::vector<std::string>& datasets,
    const std::map<std::string, std::map<std::string, double>>& auc_by_dataset) {
    if (methods.empty() || datasets.empty()) fail(errc::incomplete_table, "empty rank input");
    std::map<std::string, std::vector<double>> ranks;
    for (const auto& ds : datasets) {
        auto row_it = auc_by_dataset.find(ds);
        if (row_it == auc_by_dataset.end())
            fail(errc::incomplete_table, "no AUC row for dataset '" + ds + "'");
        const auto& row = row_it->second;
        std::vector<double> aucs;
        for (const auto& m : methods) {
            auto it = row.find(m);
            if (it == row.end())
                fail(errc::incomplete_table, "missing AUC for '" + m + "' on '" + ds + "'");
            aucs.push_back(it->second);
        }
        for (size_t i = 0; i < methods.size(); ++i) {
            double better = 0, tied = 0;
            for (size_t j = 0; j < methods.size(); ++j) {
                if (aucs[j] > aucs[i]) better += 1;
                else if (aucs[j] == aucs[i]) tied += 1;  // includes self
            }
            ranks[methods[i]].push_back(better + (tied + 1) / 2.0);
        }
    }
    std::vector<MethodRank> out;
    for (const auto& m : methods) {
        const auto& r = ranks[m];
        double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
        double ss = 0;
        for (double x : r) ss += (x - mean) * (x - mean);
        out.push_back({m, mean, std::sqrt(ss / static_cast<double>(r.size()))});
    }
    return out;
}

}  // namespace tabllm
