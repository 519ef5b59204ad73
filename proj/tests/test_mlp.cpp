#include <catch_amalgamated.hpp>
#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "tabllm/mlp.hpp"

using namespace tabllm;

namespace {

TabularDataset numeric_dataset(const std::vector<double>& xs, const std::vector<size_t>& ys) {
    DatasetSchema s;
    s.dataset_name = "numbers";
    s.task_description = "t";
    s.target_column = "y";
    s.class_names = {"a", "b"};
    FeatureSpec f;
    f.name = "X";
    f.description = "x";
    s.features = {f};
    TabularDataset ds;
    ds.schema = s;
    for (size_t i = 0; i < xs.size(); ++i) {
        ds.rows.push_back({Cell{xs[i]}});
        ds.labels.push_back(ys[i]);
    }
    return ds;
}

TabularDataset xor_dataset(size_t copies) {
    DatasetSchema s;
    s.dataset_name = "xor";
    s.task_description = "t";
    s.target_column = "y";
    s.class_names = {"zero", "one"};
    FeatureSpec a, b;
    a.name = "A";
    a.description = "a";
    b.name = "B";
    b.description = "b";
    s.features = {a, b};
    TabularDataset ds;
    ds.schema = s;
    for (size_t i = 0; i < copies; ++i) {
        for (double x : {0.0, 1.0}) {
            for (double y : {0.0, 1.0}) {
                ds.rows.push_back({Cell{x}, Cell{y}});
                ds.labels.push_back(static_cast<size_t>(x) ^ static_cast<size_t>(y));
            }
        }
    }
    return ds;
}

MlpConfig quick_config() {
    MlpConfig c;
    c.hidden_sizes = {8, 8};
    c.train.learning_rate = 0.05;
    c.train.weight_decay = 0.0;
    c.train.batch_size = 8;
    c.train.max_epochs = 200;
    c.train.patience = 200;
    c.train.seed = 1;
    return c;
}

}  // namespace

TEST_CASE("z-scores use the population standard deviation") {
    auto ds = numeric_dataset({1.0, 2.0, 3.0}, {0, 1, 0});
    Preprocessor pre;
    std::ostringstream warn;
    pre.fit(ds, warn);
    auto m = pre.transform(ds);
    REQUIRE(m.cols == 1);
    const double expected = std::sqrt(2.0 / 3.0);  // population std of {1,2,3}
    CHECK(m.at(0, 0) == Catch::Approx(-1.0 / expected * 1.0).margin(1e-12));
    CHECK(m.at(0, 0) == Catch::Approx(-1.224744871391589).margin(1e-12));
    CHECK(m.at(1, 0) == Catch::Approx(0.0).margin(1e-12));
    CHECK(m.at(2, 0) == Catch::Approx(1.224744871391589).margin(1e-12));
    CHECK(warn.str().empty());
}

TEST_CASE("categoricals one-hot encode with schema order") {
    auto ds = testutil::toy_dataset(6);  // Age numeric + Sex in {male, female}
    Preprocessor pre;
    pre.fit(ds);
    auto m = pre.transform(ds);
    CHECK(m.cols == 3);
    CHECK(m.provenance.at("Age") == std::make_pair(size_t(0), size_t(1)));
    CHECK(m.provenance.at("Sex") == std::make_pair(size_t(1), size_t(2)));
    for (size_t r = 0; r < m.rows; ++r) {
        CHECK(m.at(r, 1) + m.at(r, 2) == 1.0);
        const bool female = r % 3 == 0;
        CHECK(m.at(r, female ? 2 : 1) == 1.0);
    }
}

TEST_CASE("zero-variance columns become zeros with a warning") {
    auto ds = numeric_dataset({5.0, 5.0, 5.0, 5.0}, {0, 1, 0, 1});
    Preprocessor pre;
    std::ostringstream warn;
    pre.fit(ds, warn);
    CHECK(warn.str().find("X") != std::string::npos);
    CHECK(warn.str().find("zero variance") != std::string::npos);
    auto m = pre.transform(ds);
    for (size_t r = 0; r < m.rows; ++r) CHECK(m.at(r, 0) == 0.0);
}

TEST_CASE("transform statistics are frozen from the training split") {
    auto train = numeric_dataset({0.0, 10.0}, {0, 1});
    auto test = numeric_dataset({20.0}, {0});
    Preprocessor pre;
    pre.fit(train);
    auto m = pre.transform(test);
    // mean 5, population std 5: (20 - 5) / 5 = 3
    CHECK(m.at(0, 0) == Catch::Approx(3.0).margin(1e-12));

    auto splits = preprocess(train, test, test);
    CHECK(splits.validation.at(0, 0) == Catch::Approx(3.0).margin(1e-12));
    CHECK(splits.test.at(0, 0) == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("unknown category values are rejected at transform time") {
    auto train = testutil::toy_dataset(4);
    Preprocessor pre;
    pre.fit(train);
    auto broken = train;
    broken.rows[0][1] = Cell{std::string("other")};
    CHECK_THROWS_AS(pre.transform(broken), Error);
}

TEST_CASE("mlp learns xor exactly") {
    auto ds = xor_dataset(8);
    Preprocessor pre;
    pre.fit(ds);
    auto features = pre.transform(ds);
    auto outcome = train_mlp<double>(features, ds.labels, features, ds.labels, 2, quick_config());
    CHECK(outcome.result.history.back().train_loss < 0.1);

    auto probs = predict_proba(outcome.model, features);
    size_t correct = 0;
    for (size_t r = 0; r < probs.size(); ++r)
        correct += (probs[r][1] > probs[r][0] ? 1u : 0u) == ds.labels[r];
    CHECK(correct == probs.size());
}

TEST_CASE("training is deterministic in the seed") {
    auto ds = xor_dataset(4);
    Preprocessor pre;
    pre.fit(ds);
    auto features = pre.transform(ds);
    auto cfg = quick_config();
    cfg.train.max_epochs = 30;
    cfg.train.patience = 30;
    auto a = train_mlp<double>(features, ds.labels, features, ds.labels, 2, cfg);
    auto b = train_mlp<double>(features, ds.labels, features, ds.labels, 2, cfg);
    CHECK(a.model.weights[0].value.v == b.model.weights[0].value.v);
    REQUIRE(a.result.history.size() == b.result.history.size());
    for (size_t i = 0; i < a.result.history.size(); ++i)
        CHECK(a.result.history[i].train_loss == b.result.history[i].train_loss);

    cfg.train.seed = 2;
    auto c = train_mlp<double>(features, ds.labels, features, ds.labels, 2, cfg);
    CHECK(a.model.weights[0].value.v != c.model.weights[0].value.v);
}

TEST_CASE("predicted probabilities are normalized") {
    auto ds = xor_dataset(2);
    Preprocessor pre;
    pre.fit(ds);
    auto features = pre.transform(ds);
    auto model = MlpModel<double>::init(features.cols, {8}, 2, 3);
    auto probs = predict_proba(model, features);
    REQUIRE(probs.size() == features.rows);
    for (const auto& row : probs) {
        CHECK(row[0] + row[1] == Catch::Approx(1.0).margin(1e-6));
        CHECK(row[0] >= 0.0);
        CHECK(row[1] >= 0.0);
    }
}

TEST_CASE("label validation") {
    auto ds = xor_dataset(2);
    Preprocessor pre;
    pre.fit(ds);
    auto features = pre.transform(ds);

    std::vector<size_t> single(ds.labels.size(), 0);
    try {
        train_mlp<double>(features, single, features, single, 2, quick_config());
        FAIL("expected a bad label set");
    } catch (const Error& e) {
        CHECK(e.code() == errc::bad_label_set);
    }

    auto out_of_range = ds.labels;
    out_of_range[0] = 5;
    try {
        train_mlp<double>(features, out_of_range, features, ds.labels, 2, quick_config());
        FAIL("expected a bad label");
    } catch (const Error& e) {
        CHECK(e.code() == errc::bad_label);
    }
}

TEST_CASE("width mismatches are rejected by name") {
    auto ds = xor_dataset(2);
    Preprocessor pre;
    pre.fit(ds);
    auto features = pre.transform(ds);
    auto model = MlpModel<double>::init(7, {4}, 2, 1);
    try {
        predict_proba(model, features);
        FAIL("expected a width mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == errc::width_mismatch);
    }
}

TEST_CASE("mlp weights round-trip through the container") {
    auto model = MlpModel<float>::init(5, {6, 4}, 3, 9);
    auto path = testutil::temp_path("mlp.bin");
    model.save(path);
    auto restored = MlpModel<float>::load(path);
    CHECK(restored.dims == model.dims);
    for (size_t i = 0; i < model.weights.size(); ++i) {
        CHECK(restored.weights[i].value.v == model.weights[i].value.v);
        CHECK(restored.biases[i].value.v == model.biases[i].value.v);
    }
}

TEST_CASE("mlp config validation") {
    MlpConfig c;
    CHECK_NOTHROW(c.validate());
    c.hidden_sizes = {};
    CHECK_THROWS_AS(c.validate(), Error);
    c.hidden_sizes = {8, 0};
    CHECK_THROWS_AS(c.validate(), Error);

    auto j = MlpConfig{}.to_json();
    CHECK(MlpConfig::from_json(j).to_json() == j);
}

TEST_CASE("init guards") {
    CHECK_THROWS_AS(MlpModel<float>::init(0, {4}, 2, 1), Error);
    CHECK_THROWS_AS(MlpModel<float>::init(4, {4}, 1, 1), Error);
}
