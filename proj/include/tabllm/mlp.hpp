#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/autograd.hpp"
#include "tabllm/dataset.hpp"
#include "tabllm/error.hpp"
#include "tabllm/trainer.hpp"
#include "tabllm/weights.hpp"

namespace tabllm {

struct MlpConfig {
    std::vector<size_t> hidden_sizes = {128, 64, 32};
    TrainConfig train;

    void validate() const {
        if (hidden_sizes.empty()) fail(errc::bad_config, "hidden_sizes must be non-empty");
        for (size_t h : hidden_sizes)
            if (h == 0) fail(errc::bad_config, "hidden sizes must be positive");
        train.validate();
    }

    nlohmann::json to_json() const {
        return {{"hidden_sizes", hidden_sizes}, {"train", train.to_json()}};
    }

    static MlpConfig from_json(const nlohmann::json& j) {
        MlpConfig c;
        if (j.contains("hidden_sizes")) c.hidden_sizes = j.at("hidden_sizes").get<std::vector<size_t>>();
        if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
        c.validate();
        return c;
    }
};

// Row-major n x p numeric matrix plus a map from source feature name to its
// column span [start, start + width).
struct FeatureMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;
    std::map<std::string, std::pair<size_t, size_t>> provenance;

    double at(size_t r, size_t c) const { return data[r * cols + c]; }
};

// Z-scores numeric features with statistics frozen from the training split;
// one-hot encodes categoricals with the schema's category list. Zero-variance
// train columns pass through as zeros with a warning.
class Preprocessor {
public:
    void fit(const TabularDataset& train, std::ostream& warn = std::cerr) {
        schema_ = &train.schema;
        means_.assign(schema_->features.size(), 0.0);
        stds_.assign(schema_->features.size(), 1.0);
        degenerate_.assign(schema_->features.size(), false);
        if (train.size() == 0) fail(errc::empty_dataset, "cannot fit preprocessing on empty data");

        width_ = 0;
        for (size_t f = 0; f < schema_->features.size(); ++f) {
            const FeatureSpec& spec = schema_->features[f];
            if (spec.kind == FeatureKind::numeric) {
                double sum = 0;
                for (const auto& row : train.rows) sum += std::get<double>(row[f]);
                const double mean = sum / static_cast<double>(train.size());
                double ss = 0;
                for (const auto& row : train.rows) {
                    const double d = std::get<double>(row[f]) - mean;
                    ss += d * d;
                }
                const double var = ss / static_cast<double>(train.size());
                means_[f] = mean;
                if (var == 0.0) {
                    degenerate_[f] = true;
                    warn << "warning: feature '" << spec.name
                         << "' has zero variance on the training split; emitting zeros\n";
                } else {
                    stds_[f] = std::sqrt(var);
                }
                starts_.push_back(width_);
                width_ += 1;
            } else {
                starts_.push_back(width_);
                width_ += spec.categories->size();
            }
        }
    }

    size_t width() const { return width_; }

    FeatureMatrix transform(const TabularDataset& data) const {
        if (&data.schema != schema_ && data.schema.features.size() != schema_->features.size())
            fail(errc::schema_violation, "dataset schema differs from the fitted schema");
        FeatureMatrix m;
        m.rows = data.size();
        m.cols = width_;
        m.data.assign(m.rows * m.cols, 0.0);
        for (size_t f = 0; f < schema_->features.size(); ++f) {
            const FeatureSpec& spec = schema_->features[f];
            const size_t start = starts_[f];
            if (spec.kind == FeatureKind::numeric) {
                m.provenance[spec.name] = {start, 1};
                if (degenerate_[f]) continue;
                for (size_t r = 0; r < m.rows; ++r)
                    m.data[r * m.cols + start] =
                        (std::get<double>(data.rows[r][f]) - means_[f]) / stds_[f];
            } else {
                const auto& cats = *spec.categories;
                m.provenance[spec.name] = {start, cats.size()};
                for (size_t r = 0; r < m.rows; ++r) {
                    const std::string& v = std::get<std::string>(data.rows[r][f]);
                    auto it = std::find(cats.begin(), cats.end(), v);
                    if (it == cats.end())
                        fail(errc::unknown_category, "value '" + v + "' in feature '" + spec.name + "'");
                    m.data[r * m.cols + start + static_cast<size_t>(it - cats.begin())] = 1.0;
                }
            }
        }
        return m;
    }

private:
    const DatasetSchema* schema_ = nullptr;
    std::vector<double> means_, stds_;
    std::vector<bool> degenerate_;
    std::vector<size_t> starts_;
    size_t width_ = 0;
};

struct PreprocessedSplits {
    Preprocessor preprocessor;
    FeatureMatrix train, validation, test;
};

inline PreprocessedSplits preprocess(const TabularDataset& train, const TabularDataset& validation,
                                     const TabularDataset& test, std::ostream& warn = std::cerr) {
    PreprocessedSplits out;
    out.preprocessor.fit(train, warn);
    out.train = out.preprocessor.transform(train);
    out.validation = out.preprocessor.transform(validation);
    out.test = out.preprocessor.transform(test);
    return out;
}

// Fully-connected rectified-linear network p -> hidden... -> C.
template <typename Real>
struct MlpModel {
    std::vector<size_t> dims;  // input, hidden..., classes
    std::vector<Parameter<Real>> weights;
    std::vector<Parameter<Real>> biases;

    static MlpModel init(size_t input_width, const std::vector<size_t>& hidden_sizes,
                         size_t num_classes, int64_t seed) {
        if (input_width == 0) fail(errc::bad_config, "input width must be positive");
        if (num_classes < 2) fail(errc::bad_config, "need at least 2 classes");
        MlpModel m;
        m.dims.push_back(input_width);
        for (size_t h : hidden_sizes) m.dims.push_back(h);
        m.dims.push_back(num_classes);
        std::mt19937_64 rng(static_cast<uint64_t>(seed));
        for (size_t i = 0; i + 1 < m.dims.size(); ++i) {
            Parameter<Real> w("mlp." + std::to_string(i) + ".weight",
                              Tensor<Real>({m.dims[i], m.dims[i + 1]}), true);
            // He init for rectified-linear layers
            fill_normal(w.value, rng, std::sqrt(2.0 / static_cast<double>(m.dims[i])));
            m.weights.push_back(std::move(w));
            m.biases.emplace_back("mlp." + std::to_string(i) + ".bias",
                                  Tensor<Real>({m.dims[i + 1]}), false);
        }
        return m;
    }

    std::vector<Parameter<Real>*> parameters() {
        std::vector<Parameter<Real>*> out;
        for (size_t i = 0; i < weights.size(); ++i) {
            out.push_back(&weights[i]);
            out.push_back(&biases[i]);
        }
        return out;
    }

    std::vector<const Parameter<Real>*> parameters() const {
        auto mut = const_cast<MlpModel*>(this)->parameters();
        return {mut.begin(), mut.end()};
    }

    typename Tape<Real>::Id forward(Tape<Real>& tape, typename Tape<Real>::Id x) {
        for (size_t i = 0; i < weights.size(); ++i) {
            x = tape.linear(x, weights[i], biases[i]);
            if (i + 1 < weights.size()) x = tape.relu(x);
        }
        return x;
    }

    typename Tape<Real>::Id forward_rows(Tape<Real>& tape, const FeatureMatrix& features,
                                         const std::vector<size_t>& row_indices) {
        if (features.cols != dims.front())
            fail(errc::width_mismatch, "feature width " + std::to_string(features.cols) +
                                           " != trained width " + std::to_string(dims.front()));
        Tensor<Real> x({row_indices.size(), features.cols});
        for (size_t i = 0; i < row_indices.size(); ++i)
            for (size_t c = 0; c < features.cols; ++c)
                x.v[i * features.cols + c] =
                    static_cast<Real>(features.at(row_indices[i], c));
        return forward(tape, tape.input(std::move(x)));
    }

    void save(const std::string& path) const {
        nlohmann::json config = {{"dims", dims}};
        save_tensor_container(parameters(), config, path);
    }

    static MlpModel load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail(errc::io_failure, "cannot open " + path);
        ContainerHeader header = read_container_header(in, path);
        auto dims = header.config.at("dims").get<std::vector<size_t>>();
        if (dims.size() < 2) fail(errc::shape_table_mismatch, "mlp container needs >= 2 dims");
        std::vector<size_t> hidden(dims.begin() + 1, dims.end() - 1);
        MlpModel m = init(dims.front(), hidden, dims.back(), 0);
        load_tensor_container(m.parameters(), path);
        return m;
    }
};

// Softmax class probabilities for every row of the matrix.
template <typename Real>
inline std::vector<std::vector<double>> predict_proba(MlpModel<Real>& model,
                                                      const FeatureMatrix& features) {
    std::vector<std::vector<double>> out;
    if (features.rows == 0) return out;
    std::vector<size_t> idx(features.rows);
    std::iota(idx.begin(), idx.end(), size_t(0));
    Tape<Real> tape;
    auto probs = tape.softmax(model.forward_rows(tape, features, idx), 1);
    const auto& t = tape.value(probs);
    const size_t C = model.dims.back();
    out.resize(features.rows);
    for (size_t r = 0; r < features.rows; ++r) {
        out[r].resize(C);
        for (size_t c = 0; c < C; ++c) out[r][c] = static_cast<double>(t.v[r * C + c]);
    }
    return out;
}

template <typename Real>
struct MlpProblem {
    using RealType = Real;

    MlpModel<Real>* model = nullptr;
    const FeatureMatrix* train_features = nullptr;
    const FeatureMatrix* validation_features = nullptr;
    std::vector<size_t> train_labels, validation_labels;

    std::vector<Parameter<Real>*> parameters() { return model->parameters(); }

    size_t count(Split s) const {
        return s == Split::train ? train_features->rows : validation_features->rows;
    }

    typename Tape<Real>::Id loss(Tape<Real>& tape, Split split,
                                 const std::vector<size_t>& indices, bool /*training*/,
                                 uint64_t /*dropout_seed*/) {
        const FeatureMatrix* features =
            split == Split::train ? train_features : validation_features;
        const auto& labels = split == Split::train ? train_labels : validation_labels;
        std::vector<size_t> batch_labels;
        for (size_t i : indices) batch_labels.push_back(labels.at(i));
        return tape.cross_entropy(model->forward_rows(tape, *features, indices), batch_labels);
    }
};

template <typename Real>
struct MlpTrainOutcome {
    MlpModel<Real> model;
    TrainResult<Real> result;
};

template <typename Real = float>
inline MlpTrainOutcome<Real> train_mlp(const FeatureMatrix& train_features,
                                       const std::vector<size_t>& train_labels,
                                       const FeatureMatrix& validation_features,
                                       const std::vector<size_t>& validation_labels,
                                       size_t num_classes, const MlpConfig& config) {
    config.validate();
    if (train_features.rows != train_labels.size() ||
        validation_features.rows != validation_labels.size())
        fail(errc::shape_mismatch, "features and labels disagree in length");
    std::set<size_t> distinct(train_labels.begin(), train_labels.end());
    if (distinct.size() < 2) fail(errc::bad_label_set, "training labels contain a single class");
    for (size_t y : train_labels)
        if (y >= num_classes) fail(errc::bad_label, "label out of range");

    MlpTrainOutcome<Real> out{
        MlpModel<Real>::init(train_features.cols, config.hidden_sizes, num_classes,
                             config.train.seed),
        {}};
    MlpProblem<Real> problem;
    problem.model = &out.model;
    problem.train_features = &train_features;
    problem.validation_features = &validation_features;
    problem.train_labels = train_labels;
    problem.validation_labels = validation_labels;
    out.result = train(problem, config.train);
    return out;
}

}  // namespace tabllm
