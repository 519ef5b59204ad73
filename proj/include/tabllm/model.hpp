#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabllm/autograd.hpp"
#include "tabllm/bpe.hpp"
#include "tabllm/error.hpp"
#include "tabllm/tensor.hpp"
#include "tabllm/weights.hpp"

namespace tabllm {

enum class Pooling { last_token, mean };

enum class FreezePolicy { frozen_backbone, end_to_end };

inline FreezePolicy freeze_policy_from_string(const std::string& s) {
    if (s == "frozen" || s == "frozen_backbone") return FreezePolicy::frozen_backbone;
    if (s == "end-to-end" || s == "end_to_end") return FreezePolicy::end_to_end;
    fail(errc::bad_config, "unknown freeze policy '" + s + "'");
}

struct ModelConfig {
    size_t vocab_size = 50257;
    size_t context_length = 1024;
    size_t embed_dim = 768;
    size_t num_layers = 6;     // DistilGPT2-style default
    size_t num_heads = 12;
    size_t num_classes = 2;
    double dropout = 0.1;
    Pooling pooling = Pooling::last_token;

    void validate() const {
        if (embed_dim == 0 || num_heads == 0 || embed_dim % num_heads != 0)
            fail(errc::bad_config, "embed_dim must be divisible by num_heads");
        if (context_length < 1 || context_length > kMaxContextLength)
            fail(errc::bad_config, "context_length must be in [1, 1024]");
        if (num_classes < 2) fail(errc::bad_config, "need at least 2 classes");
        if (num_layers == 0) fail(errc::bad_config, "need at least 1 layer");
        if (dropout < 0 || dropout >= 1) fail(errc::bad_config, "dropout must be in [0, 1)");
    }

    nlohmann::json to_json() const {
        return {{"vocab_size", vocab_size},   {"context_length", context_length},
                {"embed_dim", embed_dim},     {"num_layers", num_layers},
                {"num_heads", num_heads},     {"num_classes", num_classes},
                {"dropout", dropout},
                {"pooling", pooling == Pooling::last_token ? "last_token" : "mean"}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        if (j.contains("vocab_size")) c.vocab_size = j.at("vocab_size").get<size_t>();
        if (j.contains("context_length")) c.context_length = j.at("context_length").get<size_t>();
        if (j.contains("embed_dim")) c.embed_dim = j.at("embed_dim").get<size_t>();
        if (j.contains("num_layers")) c.num_layers = j.at("num_layers").get<size_t>();
        if (j.contains("num_heads")) c.num_heads = j.at("num_heads").get<size_t>();
        if (j.contains("num_classes")) c.num_classes = j.at("num_classes").get<size_t>();
        if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
        if (j.contains("pooling")) {
            std::string p = j.at("pooling").get<std::string>();
            if (p == "last_token") c.pooling = Pooling::last_token;
            else if (p == "mean") c.pooling = Pooling::mean;
            else fail(errc::bad_config, "unknown pooling '" + p + "'");
        }
        c.validate();
        return c;
    }
};

template <typename Real>
struct TransformerBlock {
    Parameter<Real> ln1_gain, ln1_bias;
    Parameter<Real> qkv_weight, qkv_bias;
    Parameter<Real> attn_out_weight, attn_out_bias;
    Parameter<Real> ln2_gain, ln2_bias;
    Parameter<Real> mlp_in_weight, mlp_in_bias;
    Parameter<Real> mlp_out_weight, mlp_out_bias;
};

// All named tensors of the transformer plus the classification head.
template <typename Real>
struct ModelParameters {
    ModelConfig config;
    Parameter<Real> token_embedding;     // [V, d]
    Parameter<Real> position_embedding;  // [L, d]
    std::vector<TransformerBlock<Real>> blocks;
    Parameter<Real> final_ln_gain, final_ln_bias;
    Parameter<Real> head_weight, head_bias;  // [d, C], [C]

    std::vector<Parameter<Real>*> parameters() {
        std::vector<Parameter<Real>*> out = {&token_embedding, &position_embedding};
        for (auto& b : blocks) {
            out.push_back(&b.ln1_gain);
            out.push_back(&b.ln1_bias);
            out.push_back(&b.qkv_weight);
            out.push_back(&b.qkv_bias);
            out.push_back(&b.attn_out_weight);
            out.push_back(&b.attn_out_bias);
            out.push_back(&b.ln2_gain);
            out.push_back(&b.ln2_bias);
            out.push_back(&b.mlp_in_weight);
            out.push_back(&b.mlp_in_bias);
            out.push_back(&b.mlp_out_weight);
            out.push_back(&b.mlp_out_bias);
        }
        out.push_back(&final_ln_gain);
        out.push_back(&final_ln_bias);
        out.push_back(&head_weight);
        out.push_back(&head_bias);
        return out;
    }

    std::vector<const Parameter<Real>*> parameters() const {
        auto mut = const_cast<ModelParameters*>(this)->parameters();
        return {mut.begin(), mut.end()};
    }

    std::vector<Parameter<Real>*> backbone_parameters() {
        auto all = parameters();
        all.pop_back();  // head bias
        all.pop_back();  // head weight
        return all;
    }

    void apply_freeze(FreezePolicy policy) {
        const bool backbone_trainable = policy == FreezePolicy::end_to_end;
        for (auto* p : backbone_parameters()) p->trainable = backbone_trainable;
        head_weight.trainable = true;
        head_bias.trainable = true;
    }

    void zero_grads() {
        for (auto* p : parameters()) p->zero_grad();
    }
};

// GPT-2 family initialization: normal(0, 0.02) weights, residual-output
// projections scaled by 1/sqrt(2 * num_layers), zero biases, unit gains.
template <typename Real>
inline ModelParameters<Real> init_model(const ModelConfig& config, int64_t seed) {
    config.validate();
    const size_t V = config.vocab_size, L = config.context_length, d = config.embed_dim;
    const size_t C = config.num_classes;
    std::mt19937_64 rng(static_cast<uint64_t>(seed));

    auto normal = [&](std::string name, std::vector<size_t> shape, double stddev,
                      bool decay = true) {
        Parameter<Real> p(std::move(name), Tensor<Real>(std::move(shape)), decay);
        fill_normal(p.value, rng, stddev);
        return p;
    };
    auto zeros = [&](std::string name, std::vector<size_t> shape) {
        return Parameter<Real>(std::move(name), Tensor<Real>(std::move(shape)), false);
    };
    auto ones = [&](std::string name, std::vector<size_t> shape) {
        Parameter<Real> p(std::move(name), Tensor<Real>(std::move(shape)), false);
        p.value.fill(Real(1));
        return p;
    };

    const double base_std = 0.02;
    const double resid_std = base_std / std::sqrt(2.0 * static_cast<double>(config.num_layers));

    ModelParameters<Real> m;
    m.config = config;
    m.token_embedding = normal("wte", {V, d}, base_std);
    m.position_embedding = normal("wpe", {L, d}, base_std);
    for (size_t i = 0; i < config.num_layers; ++i) {
        std::string pre = "h" + std::to_string(i) + ".";
        TransformerBlock<Real> b;
        b.ln1_gain = ones(pre + "ln1.gain", {d});
        b.ln1_bias = zeros(pre + "ln1.bias", {d});
        b.qkv_weight = normal(pre + "attn.qkv.weight", {d, 3 * d}, base_std);
        b.qkv_bias = zeros(pre + "attn.qkv.bias", {3 * d});
        b.attn_out_weight = normal(pre + "attn.out.weight", {d, d}, resid_std);
        b.attn_out_bias = zeros(pre + "attn.out.bias", {d});
        b.ln2_gain = ones(pre + "ln2.gain", {d});
        b.ln2_bias = zeros(pre + "ln2.bias", {d});
        b.mlp_in_weight = normal(pre + "mlp.in.weight", {d, 4 * d}, base_std);
        b.mlp_in_bias = zeros(pre + "mlp.in.bias", {4 * d});
        b.mlp_out_weight = normal(pre + "mlp.out.weight", {4 * d, d}, resid_std);
        b.mlp_out_bias = zeros(pre + "mlp.out.bias", {d});
        m.blocks.push_back(std::move(b));
    }
    m.final_ln_gain = ones("lnf.gain", {d});
    m.final_ln_bias = zeros("lnf.bias", {d});
    m.head_weight = normal("head.weight", {d, C}, base_std);
    m.head_bias = zeros("head.bias", {C});
    return m;
}

struct ForwardOptions {
    bool training = false;       // enables dropout
    uint64_t dropout_seed = 0;   // varied per step by the trainer
    FreezePolicy freeze = FreezePolicy::end_to_end;
};

// Builds the forward graph for a batch on the given tape and returns the
// logits node ([B, C]). Sequences must all have length == context_length.
template <typename Real>
inline typename Tape<Real>::Id forward(Tape<Real>& tape, ModelParameters<Real>& m,
                                       const std::vector<TokenSequence>& batch,
                                       const ForwardOptions& opt = {}) {
    const ModelConfig& cfg = m.config;
    if (batch.empty()) fail(errc::empty_split, "forward: empty batch");
    std::vector<std::vector<TokenId>> ids;
    std::vector<size_t> lens;
    for (const auto& seq : batch) {
        if (seq.ids.size() != cfg.context_length)
            fail(errc::shape_mismatch, "sequence length != context_length");
        ids.push_back(seq.ids);
        lens.push_back(std::max<size_t>(seq.true_length, 1));
    }

    const Real eps = static_cast<Real>(1e-5);
    const double p = opt.training ? cfg.dropout : 0.0;
    uint64_t sub = 0;
    auto next_seed = [&] { return opt.dropout_seed * 7919 + sub++; };

    auto x = tape.embedding(m.token_embedding, m.position_embedding, ids);
    x = tape.dropout(x, p, next_seed());
    for (auto& b : m.blocks) {
        auto a = tape.layer_norm(x, b.ln1_gain, b.ln1_bias, eps);
        auto qkv = tape.linear(a, b.qkv_weight, b.qkv_bias);
        auto att = tape.causal_attention(qkv, cfg.num_heads, lens);
        auto proj = tape.linear(att, b.attn_out_weight, b.attn_out_bias);
        proj = tape.dropout(proj, p, next_seed());
        x = tape.add(x, proj);

        auto n2 = tape.layer_norm(x, b.ln2_gain, b.ln2_bias, eps);
        auto f = tape.linear(n2, b.mlp_in_weight, b.mlp_in_bias);
        f = tape.gelu(f);
        f = tape.linear(f, b.mlp_out_weight, b.mlp_out_bias);
        f = tape.dropout(f, p, next_seed());
        x = tape.add(x, f);
    }
    x = tape.layer_norm(x, m.final_ln_gain, m.final_ln_bias, eps);
    auto pooled = cfg.pooling == Pooling::last_token ? tape.pool_last(x, lens)
                                                     : tape.pool_mean(x, lens);
    if (opt.freeze == FreezePolicy::frozen_backbone) pooled = tape.stop_gradient(pooled);
    return tape.linear(pooled, m.head_weight, m.head_bias);
}

// Convenience inference path: forward without gradients, returning the raw
// logits tensor.
template <typename Real>
inline Tensor<Real> forward_logits(ModelParameters<Real>& m,
                                   const std::vector<TokenSequence>& batch) {
    Tape<Real> tape;
    auto logits = forward(tape, m, batch);
    return tape.value(logits);
}

template <typename Real>
inline void save_weights(const ModelParameters<Real>& params, const std::string& path) {
    save_tensor_container(params.parameters(), params.config.to_json(), path);
}

template <typename Real>
inline ModelParameters<Real> load_weights(const std::string& path, const ModelConfig& config) {
    ModelParameters<Real> params = init_model<Real>(config, 0);
    load_tensor_container(params.parameters(), path);
    return params;
}

// Imports a published GPT-2-family checkpoint (already converted to the
// container format) whose tensor names follow the HuggingFace layout, using a
// JSON name-mapping table {hf_name: our_name}. The classifier head is always
// freshly initialized.
inline nlohmann::json default_name_mapping(size_t num_layers) {
    nlohmann::json m;
    m["wte.weight"] = "wte";
    m["wpe.weight"] = "wpe";
    for (size_t i = 0; i < num_layers; ++i) {
        std::string hf = "h." + std::to_string(i) + ".";
        std::string us = "h" + std::to_string(i) + ".";
        m[hf + "ln_1.weight"] = us + "ln1.gain";
        m[hf + "ln_1.bias"] = us + "ln1.bias";
        m[hf + "attn.c_attn.weight"] = us + "attn.qkv.weight";
        m[hf + "attn.c_attn.bias"] = us + "attn.qkv.bias";
        m[hf + "attn.c_proj.weight"] = us + "attn.out.weight";
        m[hf + "attn.c_proj.bias"] = us + "attn.out.bias";
        m[hf + "ln_2.weight"] = us + "ln2.gain";
        m[hf + "ln_2.bias"] = us + "ln2.bias";
        m[hf + "mlp.c_fc.weight"] = us + "mlp.in.weight";
        m[hf + "mlp.c_fc.bias"] = us + "mlp.in.bias";
        m[hf + "mlp.c_proj.weight"] = us + "mlp.out.weight";
        m[hf + "mlp.c_proj.bias"] = us + "mlp.out.bias";
    }
    m["ln_f.weight"] = "lnf.gain";
    m["ln_f.bias"] = "lnf.bias";
    return m;
}

template <typename Real>
inline ModelParameters<Real> load_pretrained(const std::string& path, const ModelConfig& config,
                                             const nlohmann::json& name_mapping, int64_t head_seed) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_failure, "cannot open " + path);
    ContainerHeader header = read_container_header(in, path);

    ModelParameters<Real> params = init_model<Real>(config, head_seed);
    std::map<std::string, Parameter<Real>*> by_name;
    for (auto* p : params.parameters()) by_name[p->name] = p;

    std::set<std::string> loaded;
    for (const auto& item : header.tensors) {
        const std::string& hf_name = item.first;
        const ContainerEntry& entry = item.second;
        if (!name_mapping.contains(hf_name)) continue;  // e.g. lm_head or attn.bias buffers
        const std::string our_name = name_mapping.at(hf_name).get<std::string>();
        auto it = by_name.find(our_name);
        if (it == by_name.end()) fail(errc::unknown_tensor_name, "mapped name '" + our_name + "'");
        Parameter<Real>* p = it->second;
        if (entry.shape != p->value.shape)
            fail(errc::shape_table_mismatch, "shape mismatch importing '" + hf_name + "'");
        read_container_payload(in, header, hf_name, p->value);
        loaded.insert(our_name);
    }
    for (auto* p : params.backbone_parameters())
        if (!loaded.count(p->name))
            fail(errc::shape_table_mismatch, "pretrained file lacks tensor '" + p->name + "'");
    return params;
}

}  // namespace tabllm
