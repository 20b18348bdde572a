#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "flowml/errors.hpp"
#include "flowml/linalg.hpp"
#include "flowml/preprocess.hpp"
#include "flowml/rng.hpp"

namespace flowml {

enum class Activation { relu, sigmoid, softmax };
enum class Loss { binary_ce, categorical_ce };

struct LayerSpec {
    enum class Kind { dense, batchnorm, activation };

    Kind kind = Kind::dense;
    std::size_t in = 0, out = 0; // dense
    std::size_t width = 0;       // batchnorm
    Activation act = Activation::relu;

    static LayerSpec dense(std::size_t in, std::size_t out) {
        LayerSpec s;
        s.kind = Kind::dense;
        s.in = in;
        s.out = out;
        return s;
    }
    static LayerSpec batchnorm(std::size_t width) {
        LayerSpec s;
        s.kind = Kind::batchnorm;
        s.width = width;
        return s;
    }
    static LayerSpec activation(Activation a) {
        LayerSpec s;
        s.kind = Kind::activation;
        s.act = a;
        return s;
    }
};

struct Layer {
    LayerSpec spec;
    Mat w;                 // dense: out x in
    std::vector<double> b; // dense: out
    std::vector<double> gamma, beta, moving_mean, moving_var;
};

enum class NetMode { train, infer };

struct Network {
    std::vector<Layer> layers;
    NetMode mode = NetMode::train;
    std::uint64_t seed = 0;
    double bn_momentum = 0.99;
    double bn_eps = 1e-3;

    std::size_t input_width() const { return layers.front().spec.in; }

    std::size_t output_width() const {
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
            if (it->spec.kind == LayerSpec::Kind::dense) return it->spec.out;
            if (it->spec.kind == LayerSpec::Kind::batchnorm) return it->spec.width;
        }
        return 0;
    }

    bool has_batchnorm() const {
        for (const Layer& l : layers)
            if (l.spec.kind == LayerSpec::Kind::batchnorm) return true;
        return false;
    }
};

// Dense weights draw from a seeded uniform +-sqrt(6/in); biases start at 0,
// batch-norm at the identity transform with unit moving variance.
inline Network build_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    if (specs.empty()) throw SpecError("build_network: empty layer list");
    if (specs.front().kind != LayerSpec::Kind::dense)
        throw SpecError("build_network: first layer must be dense");

    Network net;
    net.seed = seed;
    Rng rng(seed);
    std::size_t width = 0;
    bool width_known = false;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& s = specs[i];
        Layer layer;
        layer.spec = s;
        switch (s.kind) {
            case LayerSpec::Kind::dense: {
                if (s.in == 0 || s.out == 0) throw SpecError("build_network: zero-width dense layer");
                if (width_known && width != s.in)
                    throw SpecError("build_network: layer " + std::to_string(i) + " expects input " +
                                    std::to_string(s.in) + " but previous width is " +
                                    std::to_string(width));
                layer.w = Mat(s.out, s.in);
                const double limit = std::sqrt(6.0 / static_cast<double>(s.in));
                for (double& v : layer.w.d) v = rng.uniform(-limit, limit);
                layer.b.assign(s.out, 0.0);
                width = s.out;
                width_known = true;
                break;
            }
            case LayerSpec::Kind::batchnorm: {
                if (s.width == 0) throw SpecError("build_network: zero-width batchnorm layer");
                if (width_known && width != s.width)
                    throw SpecError("build_network: layer " + std::to_string(i) + " batchnorm width " +
                                    std::to_string(s.width) + " does not match previous width " +
                                    std::to_string(width));
                layer.gamma.assign(s.width, 1.0);
                layer.beta.assign(s.width, 0.0);
                layer.moving_mean.assign(s.width, 0.0);
                layer.moving_var.assign(s.width, 1.0);
                width = s.width;
                width_known = true;
                break;
            }
            case LayerSpec::Kind::activation:
                break;
        }
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct ParamCounts {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};

inline std::size_t layer_param_count(const Layer& l) {
    switch (l.spec.kind) {
        case LayerSpec::Kind::dense: return l.spec.in * l.spec.out + l.spec.out;
        case LayerSpec::Kind::batchnorm: return 4 * l.spec.width;
        case LayerSpec::Kind::activation: return 0;
    }
    return 0;
}

inline ParamCounts count_params(const Network& net) {
    ParamCounts c;
    for (const Layer& l : net.layers) {
        const std::size_t p = layer_param_count(l);
        c.total += p;
        if (l.spec.kind == LayerSpec::Kind::batchnorm) {
            c.trainable += 2 * l.spec.width;
            c.non_trainable += 2 * l.spec.width;
        } else {
            c.trainable += p;
        }
    }
    return c;
}

namespace detail {

inline void apply_activation(Activation act, Mat& x) {
    switch (act) {
        case Activation::relu:
            for (double& v : x.d) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::sigmoid:
            for (double& v : x.d) v = 1.0 / (1.0 + std::exp(-v));
            break;
        case Activation::softmax:
            for (std::size_t i = 0; i < x.rows; ++i) {
                double mx = x.at(i, 0);
                for (std::size_t j = 1; j < x.cols; ++j) mx = std::max(mx, x.at(i, j));
                double sum = 0.0;
                for (std::size_t j = 0; j < x.cols; ++j) {
                    x.at(i, j) = std::exp(x.at(i, j) - mx);
                    sum += x.at(i, j);
                }
                for (std::size_t j = 0; j < x.cols; ++j) x.at(i, j) /= sum;
            }
            break;
    }
}

inline Mat dense_forward(const Layer& l, const Mat& x) {
    if (x.cols != l.spec.in)
        throw ShapeError("dense forward: input width " + std::to_string(x.cols) + " != " +
                         std::to_string(l.spec.in));
    Mat y = matmul_nt(x, l.w); // (n x in)(out x in)^T
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j) y.at(i, j) += l.b[j];
    return y;
}

} // namespace detail

// Inference-mode forward pass: batch-norm uses moving statistics, dropout
// is inactive, and the network is left untouched.
inline Mat forward_infer(const Network& net, const Mat& input) {
    Mat x = input;
    if (x.cols != net.input_width())
        throw ShapeError("forward: input width " + std::to_string(x.cols) +
                         " != network input width " + std::to_string(net.input_width()));
    for (const Layer& l : net.layers) {
        switch (l.spec.kind) {
            case LayerSpec::Kind::dense:
                x = detail::dense_forward(l, x);
                break;
            case LayerSpec::Kind::batchnorm: {
                if (x.cols != l.spec.width) throw ShapeError("batchnorm forward: width mismatch");
                for (std::size_t j = 0; j < l.spec.width; ++j) {
                    const double inv = 1.0 / std::sqrt(l.moving_var[j] + net.bn_eps);
                    for (std::size_t i = 0; i < x.rows; ++i)
                        x.at(i, j) = l.gamma[j] * (x.at(i, j) - l.moving_mean[j]) * inv + l.beta[j];
                }
                break;
            }
            case LayerSpec::Kind::activation:
                detail::apply_activation(l.spec.act, x);
                break;
        }
    }
    return x;
}

struct LayerCache {
    Mat x;                        // layer input (dense, batchnorm)
    Mat x_hat;                    // batchnorm normalized pre-affine
    std::vector<double> mean, var; // batch statistics
    Mat act_out;                  // activation output before dropout
    Mat dropout_mask;             // empty when dropout is off
};

struct ForwardTrain {
    Mat out;
    std::vector<LayerCache> caches;
};

// Training-mode forward pass: batch-norm standardizes with batch statistics
// (divisor n) and folds them into the moving averages; dropout masks hidden
// activation outputs when a rate and RNG are given.
inline ForwardTrain forward_train(Network& net, const Mat& input, double dropout_rate = 0.0,
                                  Rng* dropout_rng = nullptr) {
    if (input.cols != net.input_width())
        throw ShapeError("forward: input width " + std::to_string(input.cols) +
                         " != network input width " + std::to_string(net.input_width()));

    ForwardTrain ft;
    ft.caches.resize(net.layers.size());
    Mat x = input;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& l = net.layers[li];
        LayerCache& cache = ft.caches[li];
        switch (l.spec.kind) {
            case LayerSpec::Kind::dense:
                cache.x = x;
                x = detail::dense_forward(l, x);
                break;
            case LayerSpec::Kind::batchnorm: {
                if (x.cols != l.spec.width) throw ShapeError("batchnorm forward: width mismatch");
                if (x.rows < 2)
                    throw TrainModeError("batchnorm: training batch must have at least 2 rows");
                const double n = static_cast<double>(x.rows);
                cache.x = x;
                cache.mean.assign(l.spec.width, 0.0);
                cache.var.assign(l.spec.width, 0.0);
                for (std::size_t j = 0; j < l.spec.width; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < x.rows; ++i) s += x.at(i, j);
                    cache.mean[j] = s / n;
                    double v = 0.0;
                    for (std::size_t i = 0; i < x.rows; ++i) {
                        const double dxi = x.at(i, j) - cache.mean[j];
                        v += dxi * dxi;
                    }
                    cache.var[j] = v / n;
                }
                cache.x_hat = Mat(x.rows, x.cols);
                for (std::size_t j = 0; j < l.spec.width; ++j) {
                    const double inv = 1.0 / std::sqrt(cache.var[j] + net.bn_eps);
                    for (std::size_t i = 0; i < x.rows; ++i) {
                        cache.x_hat.at(i, j) = (x.at(i, j) - cache.mean[j]) * inv;
                        x.at(i, j) = l.gamma[j] * cache.x_hat.at(i, j) + l.beta[j];
                    }
                    l.moving_mean[j] =
                        net.bn_momentum * l.moving_mean[j] + (1.0 - net.bn_momentum) * cache.mean[j];
                    l.moving_var[j] =
                        net.bn_momentum * l.moving_var[j] + (1.0 - net.bn_momentum) * cache.var[j];
                }
                break;
            }
            case LayerSpec::Kind::activation: {
                detail::apply_activation(l.spec.act, x);
                const bool hidden = li + 1 < net.layers.size();
                if (hidden && dropout_rate > 0.0 && dropout_rng != nullptr) {
                    cache.act_out = x;
                    cache.dropout_mask = Mat(x.rows, x.cols);
                    const double keep_scale = 1.0 / (1.0 - dropout_rate);
                    for (std::size_t i = 0; i < x.d.size(); ++i) {
                        const double m = dropout_rng->bernoulli(dropout_rate) ? 0.0 : keep_scale;
                        cache.dropout_mask.d[i] = m;
                        x.d[i] *= m;
                    }
                } else {
                    cache.act_out = x;
                }
                break;
            }
        }
    }
    ft.out = std::move(x);
    return ft;
}

struct LayerGrads {
    Mat dw;
    std::vector<double> db;
    std::vector<double> dgamma, dbeta;
};

struct BackwardResult {
    double loss = 0.0;
    std::vector<LayerGrads> grads; // aligned with net.layers
};

namespace detail {

constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double p) {
    return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

} // namespace detail

// mean cross-entropy over the batch, probabilities clamped to
// [1e-12, 1-1e-12] before the logarithm
inline double cross_entropy_loss(const Mat& probs, const Mat& targets, Loss loss) {
    if (probs.rows != targets.rows || probs.cols != targets.cols)
        throw ShapeError("loss: prediction and target shapes differ");
    const double n = static_cast<double>(probs.rows);
    double total = 0.0;
    if (loss == Loss::binary_ce) {
        for (std::size_t i = 0; i < probs.rows; ++i) {
            const double p = detail::clamp_prob(probs.at(i, 0));
            const double y = targets.at(i, 0);
            total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        }
    } else {
        for (std::size_t i = 0; i < probs.rows; ++i)
            for (std::size_t j = 0; j < probs.cols; ++j) {
                const double y = targets.at(i, j);
                if (y != 0.0) total += -y * std::log(detail::clamp_prob(probs.at(i, j)));
            }
    }
    return total / n;
}

// Full reverse-mode pass. The head folds the output activation and the
// cross-entropy together (d loss / d preactivation = (p - y)/n), then walks
// dense, batch-norm (through the batch statistics) and activation layers
// backwards. Grad entries align with net.layers; activation entries are empty.
inline BackwardResult loss_and_backward(Network& net, const Mat& input, const Mat& targets,
                                        Loss loss, double dropout_rate = 0.0,
                                        Rng* dropout_rng = nullptr) {
    if (net.layers.back().spec.kind != LayerSpec::Kind::activation)
        throw SpecError("loss_and_backward: network must end with an activation layer");
    const Activation head = net.layers.back().spec.act;
    if (loss == Loss::binary_ce && (head != Activation::sigmoid || net.output_width() != 1))
        throw SpecError("binary cross-entropy requires a width-1 sigmoid head");
    if (loss == Loss::categorical_ce && head != Activation::softmax)
        throw SpecError("categorical cross-entropy requires a softmax head");
    if (targets.rows != input.rows) throw ShapeError("targets row count differs from batch");
    if (targets.cols != net.output_width()) throw ShapeError("targets width differs from head");

    ForwardTrain ft = forward_train(net, input, dropout_rate, dropout_rng);

    BackwardResult res;
    res.loss = cross_entropy_loss(ft.out, targets, loss);
    res.grads.resize(net.layers.size());

    const double n = static_cast<double>(input.rows);
    Mat g(ft.out.rows, ft.out.cols);
    for (std::size_t i = 0; i < g.d.size(); ++i) g.d[i] = (ft.out.d[i] - targets.d[i]) / n;

    // layers.size()-1 is the head activation, already folded into g
    for (std::size_t li = net.layers.size() - 1; li-- > 0;) {
        Layer& l = net.layers[li];
        LayerCache& cache = ft.caches[li];
        switch (l.spec.kind) {
            case LayerSpec::Kind::dense: {
                LayerGrads& lg = res.grads[li];
                lg.dw = matmul_tn(g, cache.x); // (n x out)^T (n x in)
                lg.db.assign(l.spec.out, 0.0);
                for (std::size_t i = 0; i < g.rows; ++i)
                    for (std::size_t j = 0; j < g.cols; ++j) lg.db[j] += g.at(i, j);
                g = matmul(g, l.w); // (n x out)(out x in)
                break;
            }
            case LayerSpec::Kind::batchnorm: {
                LayerGrads& lg = res.grads[li];
                const std::size_t w = l.spec.width;
                const double rows = static_cast<double>(g.rows);
                lg.dgamma.assign(w, 0.0);
                lg.dbeta.assign(w, 0.0);
                Mat gin(g.rows, g.cols);
                for (std::size_t j = 0; j < w; ++j) {
                    const double inv = 1.0 / std::sqrt(cache.var[j] + net.bn_eps);
                    double dvar = 0.0, dmean_a = 0.0, sum_centered = 0.0;
                    for (std::size_t i = 0; i < g.rows; ++i) {
                        lg.dgamma[j] += g.at(i, j) * cache.x_hat.at(i, j);
                        lg.dbeta[j] += g.at(i, j);
                        const double dxhat = g.at(i, j) * l.gamma[j];
                        const double centered = cache.x.at(i, j) - cache.mean[j];
                        dvar += dxhat * centered;
                        dmean_a += dxhat;
                        sum_centered += centered;
                    }
                    dvar *= -0.5 * inv * inv * inv;
                    const double dmean = -inv * dmean_a + dvar * (-2.0 / rows) * sum_centered;
                    for (std::size_t i = 0; i < g.rows; ++i) {
                        const double dxhat = g.at(i, j) * l.gamma[j];
                        const double centered = cache.x.at(i, j) - cache.mean[j];
                        gin.at(i, j) = dxhat * inv + dvar * 2.0 * centered / rows + dmean / rows;
                    }
                }
                g = std::move(gin);
                break;
            }
            case LayerSpec::Kind::activation: {
                if (cache.dropout_mask.d.size() == g.d.size())
                    for (std::size_t i = 0; i < g.d.size(); ++i) g.d[i] *= cache.dropout_mask.d[i];
                switch (l.spec.act) {
                    case Activation::relu:
                        for (std::size_t i = 0; i < g.d.size(); ++i)
                            if (cache.act_out.d[i] <= 0.0) g.d[i] = 0.0;
                        break;
                    case Activation::sigmoid:
                        for (std::size_t i = 0; i < g.d.size(); ++i) {
                            const double s = cache.act_out.d[i];
                            g.d[i] *= s * (1.0 - s);
                        }
                        break;
                    case Activation::softmax:
                        for (std::size_t i = 0; i < g.rows; ++i) {
                            double dot = 0.0;
                            for (std::size_t j = 0; j < g.cols; ++j)
                                dot += g.at(i, j) * cache.act_out.at(i, j);
                            for (std::size_t j = 0; j < g.cols; ++j)
                                g.at(i, j) = cache.act_out.at(i, j) * (g.at(i, j) - dot);
                        }
                        break;
                }
                break;
            }
        }
    }
    return res;
}

// ---- Adam -------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<LayerGrads> m, v;
    long long t = 0;
};

// theta -= lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected moments
inline void adam_update(std::vector<double>& param, const std::vector<double>& grad,
                        std::vector<double>& m, std::vector<double>& v, long long t,
                        const AdamConfig& cfg) {
    if (param.size() != grad.size() || param.size() != m.size() || param.size() != v.size())
        throw ShapeError("adam_update: size mismatch");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        param[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

inline AdamState adam_init(const Network& net) {
    AdamState st;
    st.m.resize(net.layers.size());
    st.v.resize(net.layers.size());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const Layer& l = net.layers[li];
        if (l.spec.kind == LayerSpec::Kind::dense) {
            st.m[li].dw = Mat(l.spec.out, l.spec.in);
            st.m[li].db.assign(l.spec.out, 0.0);
            st.v[li].dw = Mat(l.spec.out, l.spec.in);
            st.v[li].db.assign(l.spec.out, 0.0);
        } else if (l.spec.kind == LayerSpec::Kind::batchnorm) {
            st.m[li].dgamma.assign(l.spec.width, 0.0);
            st.m[li].dbeta.assign(l.spec.width, 0.0);
            st.v[li].dgamma.assign(l.spec.width, 0.0);
            st.v[li].dbeta.assign(l.spec.width, 0.0);
        }
    }
    return st;
}

inline void adam_step(AdamState& st, Network& net, const std::vector<LayerGrads>& grads,
                      const AdamConfig& cfg) {
    if (grads.size() != net.layers.size()) throw ShapeError("adam_step: grads misaligned");
    const long long t = ++st.t;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& l = net.layers[li];
        if (l.spec.kind == LayerSpec::Kind::dense) {
            adam_update(l.w.d, grads[li].dw.d, st.m[li].dw.d, st.v[li].dw.d, t, cfg);
            adam_update(l.b, grads[li].db, st.m[li].db, st.v[li].db, t, cfg);
        } else if (l.spec.kind == LayerSpec::Kind::batchnorm) {
            adam_update(l.gamma, grads[li].dgamma, st.m[li].dgamma, st.v[li].dgamma, t, cfg);
            adam_update(l.beta, grads[li].dbeta, st.m[li].dbeta, st.v[li].dbeta, t, cfg);
        }
    }
}

// ---- training loop ------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    Loss loss = Loss::binary_ce;
    std::uint64_t shuffle_seed = 0;
    int patience = -1; // <0 disables early stopping
    double dropout = 0.0;
};

struct EpochStats {
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainingHistory {
    std::vector<EpochStats> epochs;
};

inline Mat matrix_view(const FeatureMatrix& m) {
    Mat x(m.rows, m.cols);
    x.d = m.data;
    return x;
}

inline Mat make_targets(const FeatureMatrix& m, Loss loss, std::size_t head_width) {
    Mat t(m.rows, head_width);
    if (loss == Loss::binary_ce) {
        for (std::size_t i = 0; i < m.rows; ++i) t.at(i, 0) = static_cast<double>(m.labels[i]);
    } else {
        if (!m.has_class_labels())
            throw ArgumentError("categorical loss requires class labels on the matrix");
        for (std::size_t i = 0; i < m.rows; ++i) {
            const int c = m.class_labels[i];
            if (c < 0 || static_cast<std::size_t>(c) >= head_width)
                throw ShapeError("class label " + std::to_string(c) + " out of range for head width " +
                                 std::to_string(head_width));
            t.at(i, static_cast<std::size_t>(c)) = 1.0;
        }
    }
    return t;
}

// infer-mode loss and accuracy over a whole matrix
inline std::pair<double, double> evaluate(const Network& net, const FeatureMatrix& m, Loss loss) {
    const Mat x = matrix_view(m);
    const Mat probs = forward_infer(net, x);
    const Mat targets = make_targets(m, loss, net.output_width());
    const double l = cross_entropy_loss(probs, targets, loss);
    std::size_t correct = 0;
    if (loss == Loss::binary_ce) {
        for (std::size_t i = 0; i < m.rows; ++i) {
            const int pred = probs.at(i, 0) >= 0.5 ? 1 : 0;
            if (pred == m.labels[i]) ++correct;
        }
    } else {
        for (std::size_t i = 0; i < m.rows; ++i) {
            std::size_t arg = 0;
            for (std::size_t j = 1; j < probs.cols; ++j)
                if (probs.at(i, j) > probs.at(i, arg)) arg = j;
            if (static_cast<int>(arg) == m.class_labels[i]) ++correct;
        }
    }
    return {l, m.rows ? static_cast<double>(correct) / static_cast<double>(m.rows) : 0.0};
}

// Seeded minibatch training: per epoch a full shuffle, forward/backward/adam
// over every batch, then an inference-mode evaluation on both splits. A
// trailing one-row batch is folded into its predecessor so batch-norm keeps
// defined statistics. The network comes back in inference mode.
inline TrainingHistory train(Network& net, const FeatureMatrix& train_m,
                             const FeatureMatrix& val_m, const TrainConfig& cfg) {
    if (train_m.rows == 0) throw EmptyInput("train: empty training matrix");
    if (cfg.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ArgumentError("train: learning_rate must be > 0");
    if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0))
        throw ArgumentError("train: dropout must be in [0,1)");
    if (train_m.cols != net.input_width())
        throw ShapeError("train: matrix width != network input width");

    const std::size_t head = net.output_width();
    const Mat x_all = matrix_view(train_m);
    const Mat t_all = make_targets(train_m, cfg.loss, head);

    AdamState adam = adam_init(net);
    const AdamConfig acfg{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon};
    Rng shuffle_rng(cfg.shuffle_seed);
    Rng dropout_rng(mix_seed(cfg.shuffle_seed, 0xD0));

    TrainingHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;

    net.mode = NetMode::train;
    std::vector<std::size_t> idx(train_m.rows);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(idx);

        std::vector<std::pair<std::size_t, std::size_t>> batches; // [begin, end)
        for (std::size_t b = 0; b < idx.size(); b += cfg.batch_size)
            batches.emplace_back(b, std::min(b + cfg.batch_size, idx.size()));
        if (batches.size() > 1 && batches.back().second - batches.back().first == 1 &&
            net.has_batchnorm()) {
            batches.pop_back();
            batches.back().second = idx.size();
        }

        for (const auto& [begin, end] : batches) {
            const std::size_t bn = end - begin;
            Mat xb(bn, train_m.cols);
            Mat tb(bn, head);
            for (std::size_t i = 0; i < bn; ++i) {
                const std::size_t src = idx[begin + i];
                for (std::size_t j = 0; j < train_m.cols; ++j) xb.at(i, j) = x_all.at(src, j);
                for (std::size_t j = 0; j < head; ++j) tb.at(i, j) = t_all.at(src, j);
            }
            BackwardResult back = loss_and_backward(net, xb, tb, cfg.loss, cfg.dropout,
                                                    cfg.dropout > 0.0 ? &dropout_rng : nullptr);
            adam_step(adam, net, back.grads, acfg);
        }

        EpochStats stats;
        std::tie(stats.train_loss, stats.train_accuracy) = evaluate(net, train_m, cfg.loss);
        std::tie(stats.val_loss, stats.val_accuracy) = evaluate(net, val_m, cfg.loss);
        history.epochs.push_back(stats);

        if (cfg.patience >= 0) {
            if (stats.val_loss < best_val) {
                best_val = stats.val_loss;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }

    net.mode = NetMode::infer;
    return history;
}

// pure inference on a feature matrix; moving statistics stay untouched
inline Mat predict(const Network& net, const FeatureMatrix& m) {
    return forward_infer(net, matrix_view(m));
}

// ---- model serialization -------------------------------------------------------

struct ModelMeta {
    std::string pipeline_ref;
    std::vector<std::string> feature_names;
    std::vector<std::string> classes; // empty for the binary head
    std::string train_config_digest;
    std::size_t pca_components = 0;
};

constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const Network& net, const ModelMeta& meta = {}) {
    nlohmann::json j;
    j["format"] = "flowml-model";
    j["version"] = kModelFormatVersion;
    j["seed"] = net.seed;
    j["bn_momentum"] = net.bn_momentum;
    j["bn_eps"] = net.bn_eps;
    j["pipeline_ref"] = meta.pipeline_ref;
    j["feature_names"] = meta.feature_names;
    j["classes"] = meta.classes;
    j["train_config_digest"] = meta.train_config_digest;
    j["pca_components"] = meta.pca_components;
    nlohmann::json layers = nlohmann::json::array();
    for (const Layer& l : net.layers) {
        nlohmann::json jl;
        switch (l.spec.kind) {
            case LayerSpec::Kind::dense:
                jl["kind"] = "dense";
                jl["in"] = l.spec.in;
                jl["out"] = l.spec.out;
                jl["w"] = l.w.d;
                jl["b"] = l.b;
                break;
            case LayerSpec::Kind::batchnorm:
                jl["kind"] = "batchnorm";
                jl["width"] = l.spec.width;
                jl["gamma"] = l.gamma;
                jl["beta"] = l.beta;
                jl["moving_mean"] = l.moving_mean;
                jl["moving_var"] = l.moving_var;
                break;
            case LayerSpec::Kind::activation:
                jl["kind"] = "activation";
                jl["fn"] = l.spec.act == Activation::relu      ? "relu"
                           : l.spec.act == Activation::sigmoid ? "sigmoid"
                                                               : "softmax";
                break;
        }
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    return j;
}

inline void save_model(const Network& net, const std::string& path, const ModelMeta& meta = {}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << model_to_json(net, meta).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

struct LoadedModel {
    Network net;
    ModelMeta meta;
};

namespace detail {

inline std::vector<double> load_array(const nlohmann::json& jl, const char* key,
                                      std::size_t expected, const std::string& where) {
    auto v = jl.at(key).get<std::vector<double>>();
    if (v.size() != expected)
        throw FormatError(where + ": `" + key + "` length " + std::to_string(v.size()) +
                          " != expected " + std::to_string(expected));
    return v;
}

} // namespace detail

inline LoadedModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "flowml-model") throw FormatError("model file: unexpected format tag");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw FormatError("model file: unsupported version");

        LoadedModel lm;
        lm.net.seed = j.at("seed").get<std::uint64_t>();
        lm.net.bn_momentum = j.at("bn_momentum").get<double>();
        lm.net.bn_eps = j.at("bn_eps").get<double>();
        lm.net.mode = NetMode::infer;
        lm.meta.pipeline_ref = j.at("pipeline_ref").get<std::string>();
        lm.meta.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        lm.meta.classes = j.at("classes").get<std::vector<std::string>>();
        lm.meta.train_config_digest = j.at("train_config_digest").get<std::string>();
        lm.meta.pca_components = j.at("pca_components").get<std::size_t>();

        std::size_t li = 0;
        for (const auto& jl : j.at("layers")) {
            const std::string where = "model file layer " + std::to_string(li);
            const std::string kind = jl.at("kind").get<std::string>();
            Layer l;
            if (kind == "dense") {
                l.spec = LayerSpec::dense(jl.at("in").get<std::size_t>(),
                                          jl.at("out").get<std::size_t>());
                l.w = Mat(l.spec.out, l.spec.in);
                l.w.d = detail::load_array(jl, "w", l.spec.in * l.spec.out, where);
                l.b = detail::load_array(jl, "b", l.spec.out, where);
            } else if (kind == "batchnorm") {
                l.spec = LayerSpec::batchnorm(jl.at("width").get<std::size_t>());
                l.gamma = detail::load_array(jl, "gamma", l.spec.width, where);
                l.beta = detail::load_array(jl, "beta", l.spec.width, where);
                l.moving_mean = detail::load_array(jl, "moving_mean", l.spec.width, where);
                l.moving_var = detail::load_array(jl, "moving_var", l.spec.width, where);
            } else if (kind == "activation") {
                const std::string fn = jl.at("fn").get<std::string>();
                if (fn == "relu") l.spec = LayerSpec::activation(Activation::relu);
                else if (fn == "sigmoid") l.spec = LayerSpec::activation(Activation::sigmoid);
                else if (fn == "softmax") l.spec = LayerSpec::activation(Activation::softmax);
                else throw FormatError(where + ": unknown activation `" + fn + "`");
            } else {
                throw FormatError(where + ": unknown layer kind `" + kind + "`");
            }
            lm.net.layers.push_back(std::move(l));
            ++li;
        }
        if (lm.net.layers.empty()) throw FormatError("model file: no layers");
        if (lm.net.layers.front().spec.kind != LayerSpec::Kind::dense)
            throw FormatError("model file: first layer must be dense");
        return lm;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model file: ") + e.what());
    }
}

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("model file " + path + ": " + e.what());
    }
    return model_from_json(j);
}

// FNV-1a over a canonical config string; stored with saved models
inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

} // namespace flowml
