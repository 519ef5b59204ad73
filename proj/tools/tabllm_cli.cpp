// tabllm: serialize tabular data, train classifiers, benchmark methods and
// size in-context prompts. Exit codes: 0 ok, 2 input/validation, 3
// runtime/numerical, 64 usage.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabllm/benchmark.hpp"
#include "tabllm/bpe.hpp"
#include "tabllm/dataset.hpp"
#include "tabllm/mlp.hpp"
#include "tabllm/model.hpp"
#include "tabllm/serialize.hpp"
#include "tabllm/trainer.hpp"

namespace fs = std::filesystem;
using namespace tabllm;

namespace {

constexpr const char* kVersion = "1.0.0";

uint64_t fnv1a64_bytes(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64_bytes(bytes)));
    return buf;
}

int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

struct Manifest {
    std::string command;
    std::string config_hash = "-";
    std::map<std::string, std::string> dataset_hashes;
    int64_t seed = 0;
    int64_t start_ms = now_ms();

    void write(const std::string& out_dir) const {
        nlohmann::json j = {{"command", command},
                            {"config_hash", config_hash},
                            {"dataset_hashes", dataset_hashes},
                            {"seed", seed},
                            {"version", kVersion},
                            {"start_ms", start_ms},
                            {"end_ms", now_ms()}};
        std::ofstream out(fs::path(out_dir) / "manifest.json");
        if (!out) fail(errc::io_failure, "cannot write manifest in " + out_dir);
        out << j.dump(2) << '\n';
    }
};

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

TabularDataset load_inputs(const std::string& data, const std::string& schema, Manifest& manifest) {
    manifest.dataset_hashes["data"] = hash_file(data);
    manifest.dataset_hashes["schema"] = hash_file(schema);
    return load_dataset(data, schema);
}

nlohmann::json load_config_file(const std::string& path, Manifest& manifest) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) fail(errc::io_failure, "cannot open config " + path);
    manifest.config_hash = hash_file(path);
    nlohmann::json j;
    in >> j;
    return j;
}

const BpeVocabulary& vocab() {
    static BpeVocabulary v = [] {
        const char* env = std::getenv("TABLLM_ASSETS");
        const fs::path root = env ? fs::path(env) : fs::path(TABLLM_SOURCE_DIR) / "assets";
        return load_bpe((root / "gpt2" / "vocab.json").string(),
                        (root / "gpt2" / "merges.txt").string());
    }();
    return v;
}

struct TokenizedDataset {
    std::vector<TokenSequence> sequences;
    std::vector<size_t> labels;
    size_t padded_length = 0;
};

TokenizedDataset tokenize_dataset(const TabularDataset& ds, size_t target_length) {
    TokenizedDataset out;
    if (target_length == 0) {
        for (const auto& s : serialize_dataset(ds))
            target_length = std::max(target_length, encode(s.text, vocab()).size());
        target_length = std::min<size_t>(target_length, kMaxContextLength);
    }
    out.padded_length = target_length;
    for (const auto& s : serialize_dataset(ds)) {
        out.sequences.push_back(pad_or_truncate(encode(s.text, vocab()), target_length, vocab()));
        out.labels.push_back(s.label);
    }
    return out;
}

// Stratified 1/8 holdout (rounded up) for the plain train command.
std::pair<std::vector<size_t>, std::vector<size_t>> holdout_split(const TabularDataset& ds,
                                                                  int64_t seed) {
    std::vector<size_t> positions(ds.size());
    std::iota(positions.begin(), positions.end(), size_t(0));
    std::vector<size_t> labels(ds.labels.begin(), ds.labels.end());
    std::mt19937_64 rng(static_cast<uint64_t>(seed));
    auto picked = tabllm::detail::stratified_pick(positions, labels, ds.schema.num_classes(),
                                                  (ds.size() + 7) / 8, rng);
    std::vector<bool> is_val(ds.size(), false);
    for (size_t p : picked) is_val[p] = true;
    std::vector<size_t> train_idx, val_idx;
    for (size_t i = 0; i < ds.size(); ++i) (is_val[i] ? val_idx : train_idx).push_back(i);
    return {train_idx, val_idx};
}

void print_history(const std::vector<EpochStats>& history) {
    for (const auto& e : history)
        std::cout << "epoch=" << e.epoch << " train_loss=" << e.train_loss
                  << " validation_loss=" << e.validation_loss << '\n';
}

// --- subcommand bodies -------------------------------------------------------

int run_serialize(const std::string& data, const std::string& schema, const std::string& out_dir,
                  bool include_task, Manifest& manifest) {
    auto ds = load_inputs(data, schema, manifest);
    auto samples = serialize_dataset(ds);
    if (include_task)
        for (auto& s : samples) s.text = build_transfer_prompt(s, ds.schema, true);
    fs::create_directories(out_dir);
    export_corpus_jsonl(samples, (fs::path(out_dir) / "corpus.jsonl").string());
    manifest.write(out_dir);
    std::cout << "rows=" << samples.size() << " out=" << out_dir << "/corpus.jsonl\n";
    return 0;
}

int run_train(const std::string& data, const std::string& schema, const std::string& config_path,
              const std::string& mode, const std::string& pretrained, const std::string& out_dir,
              int64_t seed_flag, bool seed_given, Manifest& manifest) {
    auto ds = load_inputs(data, schema, manifest);
    auto config = load_config_file(config_path, manifest);

    ModelConfig mc = config.contains("model") ? ModelConfig::from_json(config.at("model"))
                                              : ModelConfig{};
    TrainConfig tc = config.contains("train") ? TrainConfig::from_json(config.at("train"))
                                              : TrainConfig{};
    tc.freeze = freeze_policy_from_string(mode);  // flag wins over the file
    if (seed_given) tc.seed = seed_flag;
    mc.num_classes = ds.schema.num_classes();
    manifest.seed = tc.seed;

    auto tokens = tokenize_dataset(ds, pretrained.empty() ? 0 : mc.context_length);
    if (pretrained.empty()) mc.context_length = tokens.padded_length;
    mc.validate();

    ModelParameters<float> model =
        pretrained.empty()
            ? init_model<float>(mc, tc.seed)
            : load_pretrained<float>(pretrained, mc, default_name_mapping(mc.num_layers), tc.seed);

    auto [train_idx, val_idx] = holdout_split(ds, tc.seed);
    std::vector<TokenSequence> train_x, val_x;
    std::vector<size_t> train_y, val_y;
    for (size_t i : train_idx) {
        train_x.push_back(tokens.sequences[i]);
        train_y.push_back(tokens.labels[i]);
    }
    for (size_t i : val_idx) {
        val_x.push_back(tokens.sequences[i]);
        val_y.push_back(tokens.labels[i]);
    }

    TransformerProblem<float> problem(model, tc.freeze, train_x, train_y, val_x, val_y);
    auto result = train(problem, tc);
    print_history(result.history);

    fs::create_directories(out_dir);
    save_weights(model, (fs::path(out_dir) / "model.bin").string());
    export_history(result.history, (fs::path(out_dir) / "history.csv").string());
    write_checkpoint_sidecar((fs::path(out_dir) / "checkpoint.json").string(), result.best.epoch,
                             result.best.validation_loss,
                             {{"model", mc.to_json()}, {"train", tc.to_json()}});
    manifest.write(out_dir);
    std::cout << "best_epoch=" << result.best.epoch
              << " best_validation_loss=" << result.best.validation_loss << " out=" << out_dir
              << "/model.bin\n";
    return 0;
}

CvMethod make_mlp_method(const nlohmann::json& config) {
    MlpConfig base = config.contains("mlp") ? MlpConfig::from_json(config.at("mlp")) : MlpConfig{};
    CvMethod m;
    m.name = "mlp";
    m.fit = [base](const TabularDataset& train_split, const TabularDataset& val_split,
                   int64_t seed) -> CvMethod::Scorer {
        auto pre = std::make_shared<Preprocessor>();
        pre->fit(train_split);
        MlpConfig cfg = base;
        cfg.train.seed = seed;
        auto outcome = std::make_shared<MlpTrainOutcome<float>>(train_mlp<float>(
            pre->transform(train_split), train_split.labels, pre->transform(val_split),
            val_split.labels, train_split.schema.num_classes(), cfg));
        return [pre, outcome](const TabularDataset& test) {
            return predict_proba(outcome->model, pre->transform(test));
        };
    };
    return m;
}

CvMethod make_transformer_method(const std::string& name, FreezePolicy policy,
                                 const nlohmann::json& config, size_t padded_length) {
    ModelConfig mc = config.contains("model") ? ModelConfig::from_json(config.at("model"))
                                              : ModelConfig{};
    TrainConfig tc = config.contains("train") ? TrainConfig::from_json(config.at("train"))
                                              : TrainConfig{};
    mc.context_length = padded_length;
    tc.freeze = policy;
    CvMethod m;
    m.name = name;
    m.fit = [mc, tc, padded_length](const TabularDataset& train_split,
                                    const TabularDataset& val_split,
                                    int64_t seed) -> CvMethod::Scorer {
        auto cfg = mc;
        cfg.num_classes = train_split.schema.num_classes();
        cfg.validate();
        auto train_tok = tokenize_dataset(train_split, padded_length);
        auto val_tok = tokenize_dataset(val_split, padded_length);
        auto model = std::make_shared<ModelParameters<float>>(init_model<float>(cfg, seed));
        TransformerProblem<float> problem(*model, tc.freeze, train_tok.sequences,
                                          train_tok.labels, val_tok.sequences, val_tok.labels);
        auto run_cfg = tc;
        run_cfg.seed = seed;
        tabllm::train(problem, run_cfg);
        return [model, padded_length](const TabularDataset& test) {
            auto tok = tokenize_dataset(test, padded_length);
            std::vector<std::vector<double>> probs;
            const size_t C = model->config.num_classes;
            for (size_t start = 0; start < tok.sequences.size(); start += 32) {
                const size_t end = std::min(tok.sequences.size(), start + 32);
                std::vector<TokenSequence> batch(tok.sequences.begin() + start,
                                                 tok.sequences.begin() + end);
                Tape<float> tape;
                auto probs_id = tape.softmax(forward(tape, *model, batch), 1);
                const auto& t = tape.value(probs_id);
                for (size_t r = 0; r < batch.size(); ++r) {
                    std::vector<double> row(C);
                    for (size_t c = 0; c < C; ++c) row[c] = t.v[r * C + c];
                    probs.push_back(row);
                }
            }
            return probs;
        };
    };
    return m;
}

int run_benchmark(const std::string& data, const std::string& schema,
                  const std::string& config_path, const std::string& methods_csv, size_t folds,
                  int64_t seed, size_t jobs, const std::string& out_dir, Manifest& manifest) {
    auto ds = load_inputs(data, schema, manifest);
    auto config = load_config_file(config_path, manifest);
    manifest.seed = seed;

    std::vector<std::string> method_names;
    std::stringstream ss(methods_csv);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) method_names.push_back(item);
    if (method_names.empty()) fail(errc::bad_config, "no methods requested");

    size_t padded_length = 0;
    for (const auto& name : method_names) {
        if (name != "mlp" && padded_length == 0)
            padded_length = tokenize_dataset(ds, 0).padded_length;
        if (name != "mlp" && name != "frozen" && name != "end-to-end")
            fail(errc::bad_config, "unknown method '" + name + "'");
    }

    auto plan = make_folds(ds, folds, seed);
    BenchmarkReport report;
    report.seed = seed;
    report.config_hash = manifest.config_hash;

    size_t failures = 0;
    for (const auto& name : method_names) {
        CvMethod method;
        if (name == "mlp") method = make_mlp_method(config);
        else if (name == "frozen")
            method = make_transformer_method(name, FreezePolicy::frozen_backbone, config,
                                             padded_length);
        else
            method = make_transformer_method(name, FreezePolicy::end_to_end, config,
                                             padded_length);
        try {
            auto results = run_cv(method, ds, plan, jobs);
            report.runs.insert(report.runs.end(), results.begin(), results.end());
        } catch (const std::exception& e) {
            ++failures;
            std::cerr << "warning: method '" << name << "' failed: " << e.what() << '\n';
        }
    }
    if (failures == method_names.size()) fail(errc::diverged_loss, "all methods failed");

    fs::create_directories(out_dir);
    emit_report(report, ReportFormat::json, (fs::path(out_dir) / "report.json").string());
    emit_report(report, ReportFormat::csv, (fs::path(out_dir) / "report.csv").string());
    emit_report(report, ReportFormat::markdown, (fs::path(out_dir) / "report.md").string());
    manifest.write(out_dir);
    std::cout << report.to_markdown();
    return 0;
}

int run_shots(const std::string& data, const std::string& schema, size_t budget,
              const std::string& out_dir, Manifest& manifest) {
    auto ds = load_inputs(data, schema, manifest);
    auto candidates = stratified_candidates(ds);
    TokenBudget token_budget;
    token_budget.prompt_limit = budget;
    auto tokenize = [](const std::string& p) { return count_tokens(p, vocab()); };
    const size_t shots = max_shots(ds.schema, candidates, token_budget, tokenize);

    std::vector<SerializedSample> prompt_examples(
        candidates.begin(), candidates.begin() + std::min(shots, candidates.size()));
    const auto prompt = build_featllm_prompt(ds.schema, prompt_examples, PromptTemplate::defaults());
    const size_t prompt_tokens = count_tokens(prompt, vocab());

    fs::create_directories(out_dir);
    {
        std::ofstream out(fs::path(out_dir) / "shots.json");
        out << nlohmann::json{{"dataset", ds.schema.dataset_name},
                              {"budget", budget},
                              {"shots", shots},
                              {"prompt_tokens", prompt_tokens}}
                   .dump(2)
            << '\n';
        std::ofstream ptxt(fs::path(out_dir) / "prompt.txt");
        ptxt << prompt;
    }
    manifest.write(out_dir);
    std::cout << "shots=" << shots << " prompt_tokens=" << prompt_tokens << " budget=" << budget
              << '\n';
    return 0;
}

int classify_error(errc code) {
    switch (code) {
        case errc::diverged_loss:
        case errc::missing_gradient:
        case errc::timeout:
        case errc::rate_limited:
        case errc::auth_failure:
        case errc::malformed_response:
            return 3;
        default:
            return 2;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabllm: tabular classification with serialized text and transformers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string data, schema, out_dir, config_path, mode = "end-to-end", pretrained, methods =
        "mlp";
    bool include_task = false;
    size_t folds = 5, jobs = 1, budget = 15000;
    int64_t seed = 42;

    auto add_io = [&](CLI::App* cmd) {
        cmd->add_option("--data", data, "dataset CSV")->required();
        cmd->add_option("--schema", schema, "schema JSON")->required();
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    auto* cmd_serialize = app.add_subcommand("serialize", "render rows as a text corpus");
    add_io(cmd_serialize);
    cmd_serialize->add_flag("--include-task", include_task, "prefix each line with the task");

    auto* cmd_train = app.add_subcommand("train", "finetune a transformer classifier");
    add_io(cmd_train);
    cmd_train->add_option("--config", config_path, "JSON config (model/train sections)")
        ->required();
    cmd_train->add_option("--mode", mode, "frozen or end-to-end")
        ->check(CLI::IsMember({"frozen", "end-to-end"}));
    cmd_train->add_option("--pretrained", pretrained, "pretrained weight container");
    auto* train_seed = cmd_train->add_option("--seed", seed, "training seed");

    auto* cmd_benchmark = app.add_subcommand("benchmark", "cross-validated method comparison");
    add_io(cmd_benchmark);
    cmd_benchmark->add_option("--config", config_path, "JSON config");
    cmd_benchmark->add_option("--methods", methods, "comma list: mlp,frozen,end-to-end");
    cmd_benchmark->add_option("--folds", folds, "fold count");
    cmd_benchmark->add_option("--seed", seed, "cross-validation seed");
    cmd_benchmark->add_option("--jobs", jobs, "parallel fold workers");

    auto* cmd_shots = app.add_subcommand("shots", "maximum in-context examples under a budget");
    add_io(cmd_shots);
    cmd_shots->add_option("--budget", budget, "prompt token budget");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 64;
    }

    Manifest manifest;
    manifest.command = join_args(argc, argv);
    manifest.seed = seed;

    try {
        if (cmd_serialize->parsed())
            return run_serialize(data, schema, out_dir, include_task, manifest);
        if (cmd_train->parsed())
            return run_train(data, schema, config_path, mode, pretrained, out_dir, seed,
                             train_seed->count() > 0, manifest);
        if (cmd_benchmark->parsed())
            return run_benchmark(data, schema, config_path, methods, folds, seed, jobs, out_dir,
                                 manifest);
        if (cmd_shots->parsed()) return run_shots(data, schema, budget, out_dir, manifest);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return classify_error(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 64;
}
