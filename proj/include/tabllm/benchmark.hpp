#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/dataset.hpp"
#include "tabllm/error.hpp"
#include "tabllm/folds.hpp"
#include "tabllm/metrics.hpp"

namespace tabllm {

struct FoldResult {
    std::string method;
    std::string dataset;
    size_t fold = 0;
    double auc = 0;
    double train_seconds = 0;
    double test_seconds = 0;

    nlohmann::json to_json() const {
        return {{"method", method},           {"dataset", dataset},
                {"fold", fold},               {"auc", auc},
                {"train_seconds", train_seconds}, {"test_seconds", test_seconds}};
    }

    static FoldResult from_json(const nlohmann::json& j) {
        FoldResult r;
        r.method = j.at("method").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.fold = j.at("fold").get<size_t>();
        r.auc = j.at("auc").get<double>();
        r.train_seconds = j.at("train_seconds").get<double>();
        r.test_seconds = j.at("test_seconds").get<double>();
        return r;
    }
};

// A cross-validated pipeline: fit on (train, validation) with the given fold
// seed, return a scorer producing per-row class probabilities.
struct CvMethod {
    using Scorer = std::function<std::vector<std::vector<double>>(const TabularDataset&)>;
    std::string name;
    std::function<Scorer(const TabularDataset& train, const TabularDataset& validation,
                         int64_t seed)>
        fit;
};

inline int64_t fold_seed(int64_t base_seed, size_t fold_index) {
    return base_seed * 1000003 + static_cast<int64_t>(fold_index) + 1;
}

// Trains and scores each fold of the plan. With jobs > 1 folds run on worker
// threads; results are ordered by fold index either way.
inline std::vector<FoldResult> run_cv(const CvMethod& method, const TabularDataset& dataset,
                                      const FoldPlan& plan, size_t jobs = 1) {
    using clock = std::chrono::steady_clock;
    std::vector<FoldResult> results(plan.k);
    std::vector<std::string> errors(plan.k);

    auto run_fold = [&](size_t f) {
        try {
            FoldSplit split = split_fold(dataset, plan, f);
            const auto t0 = clock::now();
            auto scorer = method.fit(split.train, split.validation, fold_seed(plan.seed, f));
            const auto t1 = clock::now();
            auto probabilities = scorer(split.test);
            const auto t2 = clock::now();

            FoldResult r;
            r.method = method.name;
            r.dataset = dataset.schema.dataset_name;
            r.fold = f;
            r.auc = multiclass_auc(probabilities, split.test.labels);
            r.train_seconds = std::chrono::duration<double>(t1 - t0).count();
            r.test_seconds = std::chrono::duration<double>(t2 - t1).count();
            results[f] = std::move(r);
        } catch (const std::exception& e) {
            errors[f] = e.what();
        }
    };

    if (jobs <= 1) {
        for (size_t f = 0; f < plan.k; ++f) run_fold(f);
    } else {
        std::vector<std::thread> workers;
        std::mutex next_mutex;
        size_t next = 0;
        for (size_t w = 0; w < std::min(jobs, plan.k); ++w) {
            workers.emplace_back([&] {
                for (;;) {
                    size_t f;
                    {
                        std::lock_guard<std::mutex> lock(next_mutex);
                        if (next >= plan.k) return;
                        f = next++;
                    }
                    run_fold(f);
                }
            });
        }
        for (auto& t : workers) t.join();
    }

    for (size_t f = 0; f < plan.k; ++f)
        if (!errors[f].empty())
            throw Error(errc::diverged_loss,
                        "fold " + std::to_string(f) + " failed: " + errors[f]);
    return results;
}

struct MethodDatasetAggregate {
    std::string method;
    std::string dataset;
    size_t folds = 0;
    double mean_auc = 0;
    double std_auc = 0;  // population std over folds
    double total_wall_seconds = 0;
};

inline std::string format_mean_std(double mean, double std) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f (%.3f)", mean, std);
    return buf;
}

struct BenchmarkReport {
    int64_t seed = 0;
    std::string config_hash;
    std::vector<FoldResult> runs;

    std::vector<MethodDatasetAggregate> aggregates() const {
        std::map<std::pair<std::string, std::string>, std::vector<const FoldResult*>> groups;
        std::vector<std::pair<std::string, std::string>> order;
        for (const auto& r : runs) {
            auto key = std::make_pair(r.method, r.dataset);
            if (!groups.count(key)) order.push_back(key);
            groups[key].push_back(&r);
        }
        std::vector<MethodDatasetAggregate> out;
        for (const auto& key : order) {
            const auto& g = groups[key];
            MethodDatasetAggregate a;
            a.method = key.first;
            a.dataset = key.second;
            a.folds = g.size();
            for (const auto* r : g) {
                a.mean_auc += r->auc;
                a.total_wall_seconds += r->train_seconds + r->test_seconds;
            }
            a.mean_auc /= static_cast<double>(g.size());
            for (const auto* r : g) {
                const double d = r->auc - a.mean_auc;
                a.std_auc += d * d;
            }
            a.std_auc = std::sqrt(a.std_auc / static_cast<double>(g.size()));
            out.push_back(a);
        }
        return out;
    }

    std::vector<MethodRank> ranks() const {
        std::vector<std::string> methods, datasets;
        std::map<std::string, std::map<std::string, double>> table;
        for (const auto& a : aggregates()) {
            if (std::find(methods.begin(), methods.end(), a.method) == methods.end())
                methods.push_back(a.method);
            if (std::find(datasets.begin(), datasets.end(), a.dataset) == datasets.end())
                datasets.push_back(a.dataset);
            table[a.dataset][a.method] = a.mean_auc;
        }
        if (methods.empty()) return {};
        return rank_methods(methods, datasets, table);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["environment"] = {{"seed", seed}, {"config_hash", config_hash}};
        // macro one-vs-rest AUC for multiclass; population std over folds
        j["conventions"] = {{"multiclass_auc", "macro one-vs-rest"}, {"std", "population"}};
        j["runs"] = nlohmann::json::array();
        for (const auto& r : runs) j["runs"].push_back(r.to_json());
        j["aggregates"] = nlohmann::json::array();
        for (const auto& a : aggregates())
            j["aggregates"].push_back({{"method", a.method},
                                       {"dataset", a.dataset},
                                       {"folds", a.folds},
                                       {"mean_auc", a.mean_auc},
                                       {"std_auc", a.std_auc},
                                       {"total_wall_seconds", a.total_wall_seconds}});
        j["ranks"] = nlohmann::json::array();
        for (const auto& r : ranks())
            j["ranks"].push_back(
                {{"method", r.method}, {"mean_rank", r.mean_rank}, {"std_rank", r.std_rank}});
        return j;
    }

    std::string to_csv() const {
        std::string out = "method,dataset,fold,auc,train_seconds,test_seconds\n";
        for (const auto& r : runs) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%.17g,%.17g,%.17g\n", r.method.c_str(),
                          r.dataset.c_str(), r.fold, r.auc, r.train_seconds, r.test_seconds);
            out += buf;
        }
        return out;
    }

    std::string to_markdown() const {
        auto aggs = aggregates();
        std::vector<std::string> methods, datasets;
        for (const auto& a : aggs) {
            if (std::find(methods.begin(), methods.end(), a.method) == methods.end())
                methods.push_back(a.method);
            if (std::find(datasets.begin(), datasets.end(), a.dataset) == datasets.end())
                datasets.push_back(a.dataset);
        }
        std::string out = "AUC conventions: macro one-vs-rest for multiclass; std is the "
                          "population std over folds.\n\n";
        out += "## AUC, mean (std) over folds\n\n| Dataset |";
        for (const auto& m : methods) out += " " + m + " |";
        out += "\n|---|";
        for (size_t i = 0; i < methods.size(); ++i) out += "---|";
        out += "\n";
        for (const auto& ds : datasets) {
            out += "| " + ds + " |";
            for (const auto& m : methods) {
                bool found = false;
                for (const auto& a : aggs) {
                    if (a.method == m && a.dataset == ds) {
                        out += " " + format_mean_std(a.mean_auc, a.std_auc) + " |";
                        found = true;
                        break;
                    }
                }
                if (!found) out += " - |";
            }
            out += "\n";
        }
        out += "\n## Average rank\n\n| Method | Avg. rank |\n|---|---|\n";
        for (const auto& r : ranks())
            out += "| " + r.method + " | " + format_mean_std(r.mean_rank, r.std_rank) + " |\n";
        out += "\n## Wall time, total seconds per fold set\n\n| Dataset |";
        for (const auto& m : methods) out += " " + m + " |";
        out += "\n|---|";
        for (size_t i = 0; i < methods.size(); ++i) out += "---|";
        out += "\n";
        for (const auto& ds : datasets) {
            out += "| " + ds + " |";
            for (const auto& m : methods) {
                bool found = false;
                for (const auto& a : aggs) {
                    if (a.method == m && a.dataset == ds) {
                        char buf[32];
                        std::snprintf(buf, sizeof(buf), " %.1f |", a.total_wall_seconds);
                        out += buf;
                        found = true;
                        break;
                    }
                }
                if (!found) out += " - |";
            }
            out += "\n";
        }
        return out;
    }
};

enum class ReportFormat { json, csv, markdown };

inline void emit_report(const BenchmarkReport& report, ReportFormat format,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot write " + path);
    switch (format) {
        case ReportFormat::json: out << report.to_json().dump(2) << '\n'; break;
        case ReportFormat::csv: out << report.to_csv(); break;
        case ReportFormat::markdown: out << report.to_markdown(); break;
    }
    if (!out) fail(errc::io_failure, "write failed for " + path);
}

}  // namespace tabllm
