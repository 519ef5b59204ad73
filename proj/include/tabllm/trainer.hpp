#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/adamw.hpp"
#include "tabllm/autograd.hpp"
#include "tabllm/error.hpp"
#include "tabllm/folds.hpp"
#include "tabllm/model.hpp"

namespace tabllm {

struct TrainConfig {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    size_t batch_size = 16;
    size_t max_epochs = 100;
    size_t patience = 10;
    int64_t seed = 0;
    FreezePolicy freeze = FreezePolicy::end_to_end;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    size_t linear_decay_steps = 0;  // 0 = constant learning rate

    void validate() const {
        if (learning_rate <= 0) fail(errc::bad_config, "learning_rate must be positive");
        if (weight_decay < 0) fail(errc::bad_config, "weight_decay must be non-negative");
        if (batch_size < 1) fail(errc::bad_config, "batch_size must be >= 1");
        if (patience < 1) fail(errc::bad_config, "patience must be >= 1");
        if (max_epochs < 1) fail(errc::bad_config, "max_epochs must be >= 1");
        AdamWConfig a{learning_rate, weight_decay, adam_beta1, adam_beta2, adam_epsilon, 0};
        a.validate();
    }

    AdamWConfig adamw() const {
        return {learning_rate, weight_decay, adam_beta1, adam_beta2,
                adam_epsilon, linear_decay_steps};
    }

    nlohmann::json to_json() const {
        return {{"learning_rate", learning_rate},
                {"weight_decay", weight_decay},
                {"batch_size", batch_size},
                {"max_epochs", max_epochs},
                {"patience", patience},
                {"seed", seed},
                {"freeze", freeze == FreezePolicy::frozen_backbone ? "frozen" : "end-to-end"},
                {"adam_beta1", adam_beta1},
                {"adam_beta2", adam_beta2},
                {"adam_epsilon", adam_epsilon},
                {"linear_decay_steps", linear_decay_steps}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
        if (j.contains("weight_decay")) c.weight_decay = j.at("weight_decay").get<double>();
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<size_t>();
        if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<size_t>();
        if (j.contains("patience")) c.patience = j.at("patience").get<size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<int64_t>();
        if (j.contains("freeze"))
            c.freeze = freeze_policy_from_string(j.at("freeze").get<std::string>());
        if (j.contains("adam_beta1")) c.adam_beta1 = j.at("adam_beta1").get<double>();
        if (j.contains("adam_beta2")) c.adam_beta2 = j.at("adam_beta2").get<double>();
        if (j.contains("adam_epsilon")) c.adam_epsilon = j.at("adam_epsilon").get<double>();
        if (j.contains("linear_decay_steps"))
            c.linear_decay_steps = j.at("linear_decay_steps").get<size_t>();
        c.validate();
        return c;
    }
};

enum class Split { train, validation };

struct EpochStats {
    size_t epoch = 0;  // 1-based
    double train_loss = 0;
    double validation_loss = 0;
};

template <typename Real>
struct Checkpoint {
    std::map<std::string, Tensor<Real>> values;
    size_t epoch = 0;
    double validation_loss = std::numeric_limits<double>::infinity();

    void capture(const std::vector<Parameter<Real>*>& params) {
        values.clear();
        for (const auto* p : params) values.emplace(p->name, p->value);
    }

    void restore(const std::vector<Parameter<Real>*>& params) const {
        for (auto* p : params) p->value = values.at(p->name);
    }
};

template <typename Real>
struct TrainResult {
    Checkpoint<Real> best;
    std::vector<EpochStats> history;
    size_t stopped_epoch = 0;
    bool early_stopped = false;
};

namespace detail {

// Mean loss over a split, computed in minibatches; per Eq. 1 semantics the
// partial last batch contributes with its true size.
template <typename Problem, typename Real>
inline double split_loss(Problem& problem, Split split, size_t n, size_t batch_size) {
    double total = 0;
    for (size_t start = 0; start < n; start += batch_size) {
        const size_t end = std::min(n, start + batch_size);
        std::vector<size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Tape<Real> tape;
        auto loss = problem.loss(tape, split, idx, /*training=*/false, /*dropout_seed=*/0);
        total += static_cast<double>(tape.value(loss).v[0]) * static_cast<double>(idx.size());
    }
    return total / static_cast<double>(n);
}

}  // namespace detail

// Epoch loop: shuffle, minibatch SGD via AdamW, full validation pass, early
// stopping on validation loss with best-checkpoint selection (ties keep the
// earliest epoch). Deterministic given config.seed.
//
// Problem is duck-typed:
//   using RealType = float or double;
//   std::vector<Parameter<RealType>*> parameters();
//   size_t count(Split);
//   Tape<RealType>::Id loss(Tape<RealType>&, Split, const std::vector<size_t>& indices,
//                           bool training, uint64_t dropout_seed);
template <typename Problem>
inline TrainResult<typename Problem::RealType> train(Problem& problem, const TrainConfig& config) {
    using Real = typename Problem::RealType;
    config.validate();
    const size_t n_train = problem.count(Split::train);
    const size_t n_val = problem.count(Split::validation);
    if (n_train == 0) fail(errc::empty_split, "empty training split");
    if (n_val == 0) fail(errc::empty_split, "empty validation split");

    auto params = problem.parameters();
    AdamW<Real> optimizer(params, config.adamw());

    TrainResult<Real> result;
    std::vector<size_t> order(n_train);
    std::iota(order.begin(), order.end(), size_t(0));

    size_t epochs_without_improvement = 0;
    for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::mt19937_64 rng(static_cast<uint64_t>(config.seed) * 1000003 + epoch);
        detail::deterministic_shuffle(order, rng);

        double train_total = 0;
        size_t batch_index = 0;
        for (size_t start = 0; start < n_train; start += config.batch_size, ++batch_index) {
            const size_t end = std::min(n_train, start + config.batch_size);
            std::vector<size_t> batch(order.begin() + static_cast<ptrdiff_t>(start),
                                      order.begin() + static_cast<ptrdiff_t>(end));
            const uint64_t dropout_seed =
                static_cast<uint64_t>(config.seed) * 2654435761u + epoch * 131071 + batch_index;
            optimizer.zero_grads();
            Tape<Real> tape;
            auto loss = problem.loss(tape, Split::train, batch, /*training=*/true, dropout_seed);
            const double loss_value = static_cast<double>(tape.value(loss).v[0]);
            if (!std::isfinite(loss_value))
                fail(errc::diverged_loss,
                     "non-finite training loss at epoch " + std::to_string(epoch));
            auto disconnected = tape.backward_checked(loss, params);
            if (!disconnected.empty())
                fail(errc::missing_gradient,
                     "trainable parameter '" + disconnected.front() + "' has no gradient path");
            optimizer.step();
            train_total += loss_value * static_cast<double>(batch.size());
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = train_total / static_cast<double>(n_train);
        stats.validation_loss =
            detail::split_loss<Problem, Real>(problem, Split::validation, n_val, config.batch_size);
        if (!std::isfinite(stats.validation_loss))
            fail(errc::diverged_loss,
                 "non-finite validation loss at epoch " + std::to_string(epoch));
        result.history.push_back(stats);
        result.stopped_epoch = epoch;

        if (stats.validation_loss < result.best.validation_loss) {
            result.best.validation_loss = stats.validation_loss;
            result.best.epoch = epoch;
            result.best.capture(params);
            epochs_without_improvement = 0;
        } else if (++epochs_without_improvement >= config.patience) {
            result.early_stopped = true;
            break;
        }
    }

    result.best.restore(params);
    return result;
}

inline void export_history(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot write " + path);
    out << "epoch,train_loss,validation_loss\n";
    out.precision(17);
    for (const auto& e : history)
        out << e.epoch << ',' << e.train_loss << ',' << e.validation_loss << '\n';
    if (!out) fail(errc::io_failure, "write failed for " + path);
}

inline void write_checkpoint_sidecar(const std::string& path, size_t epoch,
                                     double validation_loss, const nlohmann::json& config) {
    std::ofstream out(path);
    if (!out) fail(errc::io_failure, "cannot write " + path);
    nlohmann::json j = {{"epoch", epoch}, {"validation_loss", validation_loss}, {"config", config}};
    out << j.dump(2) << '\n';
}

// Sequence-classification problem over pre-tokenized text, shared by the
// frozen and end-to-end policies.
template <typename Real>
struct TransformerProblem {
    using RealType = Real;

    ModelParameters<Real>* model = nullptr;
    FreezePolicy freeze = FreezePolicy::end_to_end;
    std::vector<TokenSequence> train_inputs, validation_inputs;
    std::vector<size_t> train_labels, validation_labels;

    TransformerProblem(ModelParameters<Real>& m, FreezePolicy policy,
                       std::vector<TokenSequence> train_x, std::vector<size_t> train_y,
                       std::vector<TokenSequence> val_x, std::vector<size_t> val_y)
        : model(&m),
          freeze(policy),
          train_inputs(std::move(train_x)),
          validation_inputs(std::move(val_x)),
          train_labels(std::move(train_y)),
          validation_labels(std::move(val_y)) {
        if (train_inputs.size() != train_labels.size() ||
            validation_inputs.size() != validation_labels.size())
            fail(errc::shape_mismatch, "inputs and labels disagree in length");
        model->apply_freeze(freeze);
    }

    std::vector<Parameter<Real>*> parameters() { return model->parameters(); }

    size_t count(Split s) const {
        return s == Split::train ? train_inputs.size() : validation_inputs.size();
    }

    typename Tape<Real>::Id loss(Tape<Real>& tape, Split split,
                                 const std::vector<size_t>& indices, bool training,
                                 uint64_t dropout_seed) {
        const auto& inputs = split == Split::train ? train_inputs : validation_inputs;
        const auto& labels = split == Split::train ? train_labels : validation_labels;
        std::vector<TokenSequence> batch;
        std::vector<size_t> batch_labels;
        for (size_t i : indices) {
            batch.push_back(inputs.at(i));
            batch_labels.push_back(labels.at(i));
        }
        ForwardOptions opt;
        opt.training = training;
        opt.dropout_seed = dropout_seed;
        opt.freeze = freeze;
        auto logits = forward(tape, *model, batch, opt);
        return tape.cross_entropy(logits, batch_labels);
    }
};

}  // namespace tabllm
