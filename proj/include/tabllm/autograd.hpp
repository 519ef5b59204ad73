#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tabllm/bpe.hpp"
#include "tabllm/error.hpp"
#include "tabllm/tensor.hpp"

namespace tabllm {

// A named weight tensor with its gradient accumulator. `weight_decay` marks
// tensors subject to decoupled decay (biases and layer norms are excluded).
template <typename Real>
struct Parameter {
    std::string name;
    Tensor<Real> value;
    Tensor<Real> grad;
    bool trainable = true;
    bool weight_decay = true;

    Parameter() = default;
    Parameter(std::string n, Tensor<Real> val, bool decay = true)
        : name(std::move(n)), value(std::move(val)), weight_decay(decay) {
        grad = Tensor<Real>(value.shape);
    }

    void zero_grad() { grad.zero(); }
};

template <typename Real>
using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MapMat = Eigen::Map<MatX<Real>>;
template <typename Real>
using CMapMat = Eigen::Map<const MatX<Real>>;
template <typename Real>
using StridedMap =
    Eigen::Map<const MatX<Real>, Eigen::Unaligned, Eigen::OuterStride<Eigen::Dynamic>>;
template <typename Real>
using StridedMapMut =
    Eigen::Map<MatX<Real>, Eigen::Unaligned, Eigen::OuterStride<Eigen::Dynamic>>;

// Reverse-mode tape. Operations are recorded in construction order (which is
// topological for a define-by-run graph); backward() replays them in exact
// reverse order. Weight gradients accumulate into Parameter::grad for
// trainable parameters only.
template <typename Real>
class Tape {
public:
    using Id = size_t;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const Tensor<Real>& value(Id id) const { return nodes_.at(id).value; }
    Tensor<Real>& grad(Id id) { return nodes_.at(id).grad; }

    Id input(Tensor<Real> t) { return push(std::move(t), {}); }

    // --- elementwise -------------------------------------------------------

    Id add(Id a, Id b) {
        check_shape<Real>(value(a).same_shape(value(b)), "add: operand shapes differ");
        Tensor<Real> out = value(a);
        const auto& bv = value(b).v;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += bv[i];
        return push(std::move(out), [this, a, b](Node& n) {
            accumulate(a, n.grad.v);
            accumulate(b, n.grad.v);
        });
    }

    Id gelu(Id x) {
        // tanh approximation used by the GPT-2 family
        constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
        Tensor<Real> out = value(x);
        for (auto& e : out.v) {
            double u = static_cast<double>(e);
            e = static_cast<Real>(0.5 * u * (1.0 + std::tanh(k * (u + 0.044715 * u * u * u))));
        }
        return push(std::move(out), [this, x, k](Node& n) {
            auto& gx = nodes_[x].grad.v;
            const auto& xv = value(x).v;
            for (size_t i = 0; i < xv.size(); ++i) {
                double u = static_cast<double>(xv[i]);
                double inner = k * (u + 0.044715 * u * u * u);
                double t = std::tanh(inner);
                double d = 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * k * (1.0 + 3 * 0.044715 * u * u);
                gx[i] += static_cast<Real>(d * static_cast<double>(n.grad.v[i]));
            }
        });
    }

    Id relu(Id x) {
        Tensor<Real> out = value(x);
        for (auto& e : out.v) e = e > Real(0) ? e : Real(0);
        return push(std::move(out), [this, x](Node& n) {
            auto& gx = nodes_[x].grad.v;
            const auto& xv = value(x).v;
            for (size_t i = 0; i < xv.size(); ++i)
                if (xv[i] > Real(0)) gx[i] += n.grad.v[i];
        });
    }

    // Inverted dropout; identity when p == 0. Mask is a deterministic
    // function of seed.
    Id dropout(Id x, double p, uint64_t seed) {
        if (p <= 0) return x;
        if (p >= 1) fail(errc::bad_config, "dropout probability must be < 1");
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        auto mask = std::make_shared<std::vector<Real>>(value(x).size());
        const Real scale = static_cast<Real>(1.0 / (1.0 - p));
        Tensor<Real> out = value(x);
        for (size_t i = 0; i < out.v.size(); ++i) {
            (*mask)[i] = uni(rng) < p ? Real(0) : scale;
            out.v[i] *= (*mask)[i];
        }
        return push(std::move(out), [this, x, mask](Node& n) {
            auto& gx = nodes_[x].grad.v;
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += n.grad.v[i] * (*mask)[i];
        });
    }

    // Identity forward; blocks gradient flow (used to skip backbone backward
    // under a frozen policy).
    Id stop_gradient(Id x) {
        return push(Tensor<Real>(value(x)), {});
    }

    // --- softmax / normalization ------------------------------------------

    // Max-subtracted softmax along `axis`.
    Id softmax(Id x, size_t axis) {
        const auto& xv = value(x);
        if (axis >= xv.rank()) fail(errc::bad_axis, "softmax axis out of range");
        const size_t axis_len = xv.shape[axis];
        size_t inner = 1;
        for (size_t i = axis + 1; i < xv.rank(); ++i) inner *= xv.shape[i];
        const size_t outer = xv.size() / (axis_len * inner);

        Tensor<Real> out(xv.shape);
        for (size_t o = 0; o < outer; ++o) {
            for (size_t in = 0; in < inner; ++in) {
                const size_t base = o * axis_len * inner + in;
                Real mx = -std::numeric_limits<Real>::infinity();
                for (size_t k = 0; k < axis_len; ++k) mx = std::max(mx, xv.v[base + k * inner]);
                Real sum = 0;
                for (size_t k = 0; k < axis_len; ++k) {
                    Real e = std::exp(xv.v[base + k * inner] - mx);
                    out.v[base + k * inner] = e;
                    sum += e;
                }
                for (size_t k = 0; k < axis_len; ++k) out.v[base + k * inner] /= sum;
            }
        }
        return push(std::move(out), [this, x, axis_len, inner, outer](Node& n) {
            auto& gx = nodes_[x].grad.v;
            const auto& y = n.value.v;
            for (size_t o = 0; o < outer; ++o) {
                for (size_t in = 0; in < inner; ++in) {
                    const size_t base = o * axis_len * inner + in;
                    Real dot = 0;
                    for (size_t k = 0; k < axis_len; ++k)
                        dot += n.grad.v[base + k * inner] * y[base + k * inner];
                    for (size_t k = 0; k < axis_len; ++k)
                        gx[base + k * inner] +=
                            y[base + k * inner] * (n.grad.v[base + k * inner] - dot);
                }
            }
        });
    }

    Id layer_norm(Id x, Parameter<Real>& gain, Parameter<Real>& bias, Real eps) {
        const auto& xv = value(x);
        const size_t d = xv.last_dim();
        check_shape<Real>(gain.value.size() == d && bias.value.size() == d,
                          "layer_norm: gain/bias must match last dimension");
        const size_t rows = xv.outer_count();
        Tensor<Real> out(xv.shape);
        auto xhat = std::make_shared<std::vector<Real>>(xv.size());
        auto inv_std = std::make_shared<std::vector<Real>>(rows);
        for (size_t r = 0; r < rows; ++r) {
            const Real* xr = xv.data() + r * d;
            Real mean = 0;
            for (size_t j = 0; j < d; ++j) mean += xr[j];
            mean /= static_cast<Real>(d);
            Real var = 0;
            for (size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
            var /= static_cast<Real>(d);
            const Real istd = Real(1) / std::sqrt(var + eps);
            (*inv_std)[r] = istd;
            for (size_t j = 0; j < d; ++j) {
                const Real xh = (xr[j] - mean) * istd;
                (*xhat)[r * d + j] = xh;
                out.v[r * d + j] = gain.value.v[j] * xh + bias.value.v[j];
            }
        }
        touch(gain);
        touch(bias);
        return push(std::move(out), [this, x, &gain, &bias, d, rows, xhat, inv_std](Node& n) {
            auto& gx = nodes_[x].grad.v;
            for (size_t r = 0; r < rows; ++r) {
                const Real* dy = n.grad.v.data() + r * d;
                const Real* xh = xhat->data() + r * d;
                Real sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (size_t j = 0; j < d; ++j) {
                    const Real dxhat = dy[j] * gain.value.v[j];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xh[j];
                    if (gain.trainable) gain.grad.v[j] += dy[j] * xh[j];
                    if (bias.trainable) bias.grad.v[j] += dy[j];
                }
                const Real istd = (*inv_std)[r];
                for (size_t j = 0; j < d; ++j) {
                    const Real dxhat = dy[j] * gain.value.v[j];
                    gx[r * d + j] += istd * (dxhat - (sum_dxhat + xh[j] * sum_dxhat_xhat) /
                                                         static_cast<Real>(d));
                }
            }
        });
    }

    // --- linear algebra ----------------------------------------------------

    // y = x W + b, where x is treated as [rows, din] over its last axis.
    Id linear(Id x, Parameter<Real>& weight, Parameter<Real>& bias_param) {
        const auto& xv = value(x);
        const size_t din = xv.last_dim();
        check_shape<Real>(weight.value.rank() == 2 && weight.value.dim(0) == din,
                          "linear: weight shape mismatch for " + weight.name);
        const size_t dout = weight.value.dim(1);
        check_shape<Real>(bias_param.value.size() == dout,
                          "linear: bias shape mismatch for " + bias_param.name);
        const size_t rows = xv.outer_count();

        std::vector<size_t> out_shape = xv.shape;
        out_shape.back() = dout;
        Tensor<Real> out(out_shape);
        CMapMat<Real> X(xv.data(), rows, din);
        CMapMat<Real> W(weight.value.data(), din, dout);
        MapMat<Real> Y(out.data(), rows, dout);
        Y.noalias() = X * W;
        for (size_t r = 0; r < rows; ++r)
            for (size_t j = 0; j < dout; ++j) out.v[r * dout + j] += bias_param.value.v[j];

        touch(weight);
        touch(bias_param);
        return push(std::move(out), [this, x, &weight, &bias_param, rows, din, dout](Node& n) {
            CMapMat<Real> dY(n.grad.v.data(), rows, dout);
            CMapMat<Real> X(value(x).data(), rows, din);
            CMapMat<Real> W(weight.value.data(), din, dout);
            MapMat<Real> dX(nodes_[x].grad.v.data(), rows, din);
            dX.noalias() += dY * W.transpose();
            if (weight.trainable) {
                MapMat<Real> dW(weight.grad.v.data(), din, dout);
                dW.noalias() += X.transpose() * dY;
            }
            if (bias_param.trainable) {
                for (size_t r = 0; r < rows; ++r)
                    for (size_t j = 0; j < dout; ++j) bias_param.grad.v[j] += n.grad.v[r * dout + j];
            }
        });
    }

    // --- embedding ---------------------------------------------------------

    // out[b, l, :] = token_table[ids[b][l], :] + position_table[l, :]
    Id embedding(Parameter<Real>& token_table, Parameter<Real>& position_table,
                 const std::vector<std::vector<TokenId>>& ids) {
        const size_t B = ids.size();
        const size_t L = B ? ids[0].size() : 0;
        const size_t V = token_table.value.dim(0);
        const size_t d = token_table.value.dim(1);
        check_shape<Real>(position_table.value.dim(0) >= L && position_table.value.dim(1) == d,
                          "embedding: position table too small");
        Tensor<Real> out({B, L, d});
        for (size_t b = 0; b < B; ++b) {
            check_shape<Real>(ids[b].size() == L, "embedding: ragged batch");
            for (size_t l = 0; l < L; ++l) {
                const auto id = ids[b][l];
                if (id < 0 || static_cast<size_t>(id) >= V)
                    fail(errc::unknown_id, "token id out of vocabulary range");
                const Real* tok = token_table.value.data() + static_cast<size_t>(id) * d;
                const Real* pos = position_table.value.data() + l * d;
                Real* dst = out.data() + (b * L + l) * d;
                for (size_t j = 0; j < d; ++j) dst[j] = tok[j] + pos[j];
            }
        }
        touch(token_table);
        touch(position_table);
        auto ids_copy = std::make_shared<std::vector<std::vector<TokenId>>>(ids);
        return push(std::move(out), [this, &token_table, &position_table, ids_copy, B, L, d](Node& n) {
            for (size_t b = 0; b < B; ++b) {
                for (size_t l = 0; l < L; ++l) {
                    const Real* src = n.grad.v.data() + (b * L + l) * d;
                    if (token_table.trainable) {
                        Real* gt = token_table.grad.v.data() +
                                   static_cast<size_t>((*ids_copy)[b][l]) * d;
                        for (size_t j = 0; j < d; ++j) gt[j] += src[j];
                    }
                    if (position_table.trainable) {
                        Real* gp = position_table.grad.v.data() + l * d;
                        for (size_t j = 0; j < d; ++j) gp[j] += src[j];
                    }
                }
            }
        });
    }

    // --- attention ---------------------------------------------------------

    // Multi-head causal self-attention over packed qkv [B, L, 3d]. Key
    // positions beyond a sample's true length get an additive -inf bias, so
    // their post-softmax weight is exactly zero.
    Id causal_attention(Id qkv, size_t num_heads, const std::vector<size_t>& true_lengths) {
        const auto& qv = value(qkv);
        check_shape<Real>(qv.rank() == 3, "attention: qkv must be [B, L, 3d]");
        const size_t B = qv.dim(0), L = qv.dim(1);
        check_shape<Real>(qv.dim(2) % 3 == 0, "attention: last dim must be 3d");
        const size_t d = qv.dim(2) / 3;
        check_shape<Real>(d % num_heads == 0, "attention: d must divide num_heads");
        check_shape<Real>(true_lengths.size() == B, "attention: true_lengths size");
        const size_t dh = d / num_heads;
        const Real scale = static_cast<Real>(1.0 / std::sqrt(static_cast<double>(dh)));
        const Real neg_inf = -std::numeric_limits<Real>::infinity();

        Tensor<Real> out({B, L, d});
        auto probs = std::make_shared<Tensor<Real>>(std::vector<size_t>{B, num_heads, L, L});
        const long stride = static_cast<long>(3 * d);

        for (size_t b = 0; b < B; ++b) {
            const size_t len = std::min<size_t>(std::max<size_t>(true_lengths[b], 1), L);
            for (size_t h = 0; h < num_heads; ++h) {
                const Real* base = qv.data() + b * L * 3 * d;
                StridedMap<Real> Q(base + h * dh, L, dh, Eigen::OuterStride<>(stride));
                StridedMap<Real> K(base + d + h * dh, L, dh, Eigen::OuterStride<>(stride));
                StridedMap<Real> V(base + 2 * d + h * dh, L, dh, Eigen::OuterStride<>(stride));

                MatX<Real> scores = (Q * K.transpose()) * scale;
                for (size_t i = 0; i < L; ++i)
                    for (size_t j = 0; j < L; ++j)
                        if (j > i || j >= len) scores(i, j) = neg_inf;

                Real* P = probs->data() + ((b * num_heads + h) * L) * L;
                for (size_t i = 0; i < L; ++i) {
                    Real mx = scores(i, 0);
                    for (size_t j = 1; j < L; ++j) mx = std::max(mx, scores(i, j));
                    Real sum = 0;
                    for (size_t j = 0; j < L; ++j) {
                        const Real e = std::exp(scores(i, j) - mx);
                        P[i * L + j] = e;
                        sum += e;
                    }
                    for (size_t j = 0; j < L; ++j) P[i * L + j] /= sum;
                }

                CMapMat<Real> Pm(P, L, L);
                StridedMapMut<Real> O(out.data() + b * L * d + h * dh, L, dh,
                                      Eigen::OuterStride<>(static_cast<long>(d)));
                O.noalias() = Pm * V;
            }
        }
        return push(std::move(out),
                    [this, qkv, num_heads, B, L, d, dh, scale, probs, stride](Node& n) {
            for (size_t b = 0; b < B; ++b) {
                for (size_t h = 0; h < num_heads; ++h) {
                    const Real* base = value(qkv).data() + b * L * 3 * d;
                    StridedMap<Real> Q(base + h * dh, L, dh, Eigen::OuterStride<>(stride));
                    StridedMap<Real> K(base + d + h * dh, L, dh, Eigen::OuterStride<>(stride));
                    StridedMap<Real> V(base + 2 * d + h * dh, L, dh, Eigen::OuterStride<>(stride));
                    CMapMat<Real> P(probs->data() + ((b * num_heads + h) * L) * L, L, L);
                    StridedMap<Real> dO(n.grad.v.data() + b * L * d + h * dh, L, dh,
                                        Eigen::OuterStride<>(static_cast<long>(d)));

                    Real* gbase = nodes_[qkv].grad.v.data() + b * L * 3 * d;
                    StridedMapMut<Real> dQ(gbase + h * dh, L, dh, Eigen::OuterStride<>(stride));
                    StridedMapMut<Real> dK(gbase + d + h * dh, L, dh, Eigen::OuterStride<>(stride));
                    StridedMapMut<Real> dV(gbase + 2 * d + h * dh, L, dh,
                                           Eigen::OuterStride<>(stride));

                    dV.noalias() += P.transpose() * dO;
                    MatX<Real> dP = dO * V.transpose();
                    // softmax backward per row; masked entries have P == 0
                    MatX<Real> dS(L, L);
                    for (size_t i = 0; i < L; ++i) {
                        Real dot = 0;
                        for (size_t j = 0; j < L; ++j) dot += dP(i, j) * P(i, j);
                        for (size_t j = 0; j < L; ++j) dS(i, j) = P(i, j) * (dP(i, j) - dot);
                    }
                    dQ.noalias() += (dS * K) * scale;
                    dK.noalias() += (dS.transpose() * Q) * scale;
                }
            }
        });
    }

    // --- pooling and loss --------------------------------------------------

    // Picks hidden[b, true_length - 1, :] per sample: the last non-pad token.
    Id pool_last(Id hidden, const std::vector<size_t>& true_lengths) {
        const auto& hv = value(hidden);
        check_shape<Real>(hv.rank() == 3, "pool_last: expect [B, L, d]");
        const size_t B = hv.dim(0), L = hv.dim(1), d = hv.dim(2);
        check_shape<Real>(true_lengths.size() == B, "pool_last: true_lengths size");
        Tensor<Real> out({B, d});
        auto lens = std::make_shared<std::vector<size_t>>(true_lengths);
        for (size_t b = 0; b < B; ++b) {
            const size_t t = true_lengths[b];
            if (t < 1 || t > L) fail(errc::bad_length, "true_length outside [1, L]");
            const Real* src = hv.data() + (b * L + t - 1) * d;
            std::copy(src, src + d, out.data() + b * d);
        }
        return push(std::move(out), [this, hidden, lens, L, d](Node& n) {
            auto& gh = nodes_[hidden].grad.v;
            for (size_t b = 0; b < lens->size(); ++b) {
                const size_t t = (*lens)[b];
                for (size_t j = 0; j < d; ++j)
                    gh[(b * L + t - 1) * d + j] += n.grad.v[b * d + j];
            }
        });
    }

    // Mean pooling over non-pad positions (config alternative to pool_last).
    Id pool_mean(Id hidden, const std::vector<size_t>& true_lengths) {
        const auto& hv = value(hidden);
        check_shape<Real>(hv.rank() == 3, "pool_mean: expect [B, L, d]");
        const size_t B = hv.dim(0), L = hv.dim(1), d = hv.dim(2);
        Tensor<Real> out({B, d});
        auto lens = std::make_shared<std::vector<size_t>>(true_lengths);
        for (size_t b = 0; b < B; ++b) {
            const size_t t = true_lengths[b];
            if (t < 1 || t > L) fail(errc::bad_length, "true_length outside [1, L]");
            for (size_t l = 0; l < t; ++l)
                for (size_t j = 0; j < d; ++j)
                    out.v[b * d + j] += hv.v[(b * L + l) * d + j] / static_cast<Real>(t);
        }
        return push(std::move(out), [this, hidden, lens, L, d](Node& n) {
            auto& gh = nodes_[hidden].grad.v;
            for (size_t b = 0; b < lens->size(); ++b) {
                const size_t t = (*lens)[b];
                for (size_t l = 0; l < t; ++l)
                    for (size_t j = 0; j < d; ++j)
                        gh[(b * L + l) * d + j] += n.grad.v[b * d + j] / static_cast<Real>(t);
            }
        });
    }

    // Mean cross-entropy over the batch via log-sum-exp; returns a scalar node.
    Id cross_entropy(Id logits, const std::vector<size_t>& labels) {
        const auto& lv = value(logits);
        check_shape<Real>(lv.rank() == 2, "cross_entropy: expect [B, C]");
        const size_t B = lv.dim(0), C = lv.dim(1);
        check_shape<Real>(labels.size() == B, "cross_entropy: labels size");
        for (size_t lbl : labels)
            if (lbl >= C) fail(errc::bad_label, "label index out of range");

        auto softmaxed = std::make_shared<Tensor<Real>>(std::vector<size_t>{B, C});
        Real loss = 0;
        for (size_t b = 0; b < B; ++b) {
            const Real* row = lv.data() + b * C;
            Real mx = row[0];
            for (size_t c = 1; c < C; ++c) mx = std::max(mx, row[c]);
            Real sum = 0;
            for (size_t c = 0; c < C; ++c) sum += std::exp(row[c] - mx);
            const Real log_z = mx + std::log(sum);
            for (size_t c = 0; c < C; ++c)
                softmaxed->v[b * C + c] = std::exp(row[c] - log_z);
            loss += log_z - row[labels[b]];
        }
        loss /= static_cast<Real>(B);

        Tensor<Real> out({1});
        out.v[0] = loss;
        auto labels_copy = std::make_shared<std::vector<size_t>>(labels);
        return push(std::move(out), [this, logits, softmaxed, labels_copy, B, C](Node& n) {
            const Real up = n.grad.v[0] / static_cast<Real>(B);
            auto& gl = nodes_[logits].grad.v;
            for (size_t b = 0; b < B; ++b)
                for (size_t c = 0; c < C; ++c)
                    gl[b * C + c] +=
                        up * (softmaxed->v[b * C + c] - (c == (*labels_copy)[b] ? Real(1) : Real(0)));
        });
    }

    // --- backward ----------------------------------------------------------

    // Seeds d(loss)/d(loss) = 1 and replays recorded ops in reverse order.
    void backward(Id loss_node) {
        if (value(loss_node).size() != 1)
            fail(errc::shape_mismatch, "backward: loss must be scalar");
        for (auto& n : nodes_) n.grad.zero();
        nodes_.at(loss_node).grad.v[0] = Real(1);
        for (size_t i = loss_node + 1; i-- > 0;) {
            if (nodes_[i].back) nodes_[i].back(nodes_[i]);
        }
    }

    // backward() plus an explicit audit of the trainable set: parameters that
    // never appeared on the tape keep a zero gradient and are reported.
    std::vector<std::string> backward_checked(Id loss_node,
                                              const std::vector<Parameter<Real>*>& params,
                                              std::ostream& warn = std::cerr) {
        backward(loss_node);
        std::vector<std::string> disconnected;
        for (auto* p : params) {
            if (p->trainable && !touched_.count(p)) {
                disconnected.push_back(p->name);
                warn << "warning: parameter '" << p->name
                     << "' is not connected to the loss; gradient is zero\n";
            }
        }
        return disconnected;
    }

    bool on_tape(const Parameter<Real>* p) const { return touched_.count(p) != 0; }

private:
    struct Node {
        Tensor<Real> value;
        Tensor<Real> grad;
        std::function<void(Node&)> back;
    };

    Id push(Tensor<Real> value, std::function<void(Node&)> back) {
#ifndef NDEBUG
        if (!value.all_finite()) fail(errc::diverged_loss, "non-finite values in op output");
#endif
        Node n;
        n.grad = Tensor<Real>(value.shape);
        n.value = std::move(value);
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    void accumulate(Id id, const std::vector<Real>& g) {
        auto& dst = nodes_[id].grad.v;
        for (size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }

    void touch(const Parameter<Real>& p) { touched_.insert(&p); }

    std::vector<Node> nodes_;
    std::set<const Parameter<Real>*> touched_;
};

}  // namespace tabllm
