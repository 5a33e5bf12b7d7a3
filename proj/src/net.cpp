#include "pufatt/net.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "pufatt/rng.hpp"

namespace pufatt {

namespace {

constexpr int kRowBlock = 256;   // fixed gradient-reduction granularity
constexpr int kEvalChunk = 8192;
constexpr double kProbClip = 1e-12;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_clipped(double p) {
    if (p < kProbClip) p = kProbClip;
    if (p > 1.0 - kProbClip) p = 1.0 - kProbClip;
    return std::log(p);
}

// y[rows x out] = x[rows x in] . w[in x out] + b
void affine(const double* x, int rows, int in, const DenseLayer& layer, double* y) {
    const int out = layer.w.cols;
    for (int r = 0; r < rows; ++r) {
        const double* xr = x + static_cast<std::size_t>(r) * in;
        double* yr = y + static_cast<std::size_t>(r) * out;
        std::memcpy(yr, layer.b.data(), sizeof(double) * static_cast<std::size_t>(out));
        for (int i = 0; i < in; ++i) {
            const double xv = xr[i];
            const double* wr = layer.w.row(i);
            for (int o = 0; o < out; ++o) yr[o] += xv * wr[o];
        }
    }
}

// dw += x^T . dy, db += column sums of dy
void accumulate_layer_grad(const double* x, int rows, int in, const double* dy, int out, DenseLayer& grad) {
    for (int r = 0; r < rows; ++r) {
        const double* xr = x + static_cast<std::size_t>(r) * in;
        const double* dyr = dy + static_cast<std::size_t>(r) * out;
        for (int i = 0; i < in; ++i) {
            const double xv = xr[i];
            double* gw = grad.w.row(i);
            for (int o = 0; o < out; ++o) gw[o] += xv * dyr[o];
        }
        for (int o = 0; o < out; ++o) grad.b[static_cast<std::size_t>(o)] += dyr[o];
    }
}

// dx[rows x in] (+)= dy[rows x out] . w^T
void backprop_input(const double* dy, int rows, int out, const Matrix& w, double* dx, bool accumulate) {
    const int in = w.rows;
    for (int r = 0; r < rows; ++r) {
        const double* dyr = dy + static_cast<std::size_t>(r) * out;
        double* dxr = dx + static_cast<std::size_t>(r) * in;
        for (int i = 0; i < in; ++i) {
            const double* wr = w.row(i);
            double acc = 0.0;
            for (int o = 0; o < out; ++o) acc += dyr[o] * wr[o];
            dxr[i] = accumulate ? dxr[i] + acc : acc;
        }
    }
}

void apply_activation(Activation act, double* z, std::size_t count) {
    if (act == Activation::Rectifier) {
        for (std::size_t i = 0; i < count; ++i)
            if (z[i] < 0.0) z[i] = 0.0;
    } else {
        for (std::size_t i = 0; i < count; ++i) z[i] = std::tanh(z[i]);
    }
}

// Multiplies the incoming delta by the activation derivative, expressed in
// terms of the activation output.
void mask_by_activation(Activation act, const double* a, double* delta, std::size_t count) {
    if (act == Activation::Rectifier) {
        for (std::size_t i = 0; i < count; ++i)
            if (a[i] <= 0.0) delta[i] = 0.0;
    } else {
        for (std::size_t i = 0; i < count; ++i) delta[i] *= 1.0 - a[i] * a[i];
    }
}

void check_finite(const double* a, std::size_t count, const char* where) {
    for (std::size_t i = 0; i < count; ++i)
        if (!std::isfinite(a[i])) throw std::runtime_error(std::string("non-finite activation in ") + where);
}

DenseLayer zero_like(const DenseLayer& layer) {
    DenseLayer z;
    z.w = Matrix(layer.w.rows, layer.w.cols);
    z.b.assign(layer.b.size(), 0.0);
    return z;
}

Gradients zero_gradients(const std::vector<DenseLayer>& shared, const std::vector<DenseLayer>& heads) {
    Gradients g;
    g.shared.reserve(shared.size());
    g.heads.reserve(heads.size());
    for (const auto& l : shared) g.shared.push_back(zero_like(l));
    for (const auto& l : heads) g.heads.push_back(zero_like(l));
    return g;
}

void add_into(DenseLayer& into, const DenseLayer& from) {
    for (std::size_t i = 0; i < into.w.data.size(); ++i) into.w.data[i] += from.w.data[i];
    for (std::size_t i = 0; i < into.b.size(); ++i) into.b[i] += from.b[i];
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(hw == 0 ? 1 : std::min(hw, 8u));
}

}  // namespace

void NetConfig::validate() const {
    if (input_dim < 1) throw std::invalid_argument("net config: input dimension must be >= 1");
    if (hidden.empty()) throw std::invalid_argument("net config: at least one hidden layer required");
    for (int width : hidden)
        if (width < 1) throw std::invalid_argument("net config: hidden widths must be >= 1");
    if (heads.empty()) throw std::invalid_argument("net config: at least one head required");
    int binary_heads = 0;
    for (std::size_t i = 0; i < heads.size(); ++i) {
        const HeadSpec& h = heads[i];
        if (h.kind == HeadKind::Binary) {
            if (h.classes != 1) throw std::invalid_argument("net config: binary heads have one unit");
            if (i != 0) throw std::invalid_argument("net config: the binary response head must come first");
            ++binary_heads;
        } else if (h.classes < 2) {
            throw std::invalid_argument("net config: categorical heads need >= 2 classes");
        }
        if (!std::isfinite(h.loss_weight) || h.loss_weight < 0.0)
            throw std::invalid_argument("net config: loss weights must be finite and non-negative");
    }
    if (binary_heads > 1) throw std::invalid_argument("net config: at most one binary head");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("train config: max epochs must be >= 1");
    if (patience < 1 || patience > max_epochs)
        throw std::invalid_argument("train config: patience must lie in [1, max_epochs]");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
        throw std::invalid_argument("train config: betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("train config: epsilon must be > 0");
    if (threads < 0) throw std::invalid_argument("train config: thread count must be >= 0");
}

MultiHeadNet::MultiHeadNet(NetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(seed);
    auto init_layer = [&rng](int fan_in, int fan_out) {
        DenseLayer layer;
        layer.w = Matrix(fan_in, fan_out);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (auto& v : layer.w.data) v = rng.next_uniform(-limit, limit);
        layer.b.assign(static_cast<std::size_t>(fan_out), 0.0);
        return layer;
    };
    int width = cfg_.input_dim;
    for (int h : cfg_.hidden) {
        shared_.push_back(init_layer(width, h));
        width = h;
    }
    for (const HeadSpec& head : cfg_.heads) heads_.push_back(init_layer(width, head.classes));
}

HeadOutputs MultiHeadNet::forward(const Matrix& inputs) const {
    if (inputs.cols != cfg_.input_dim) throw std::invalid_argument("forward: input width mismatch");
    const int rows = inputs.rows;

    Matrix current = inputs;
    for (const DenseLayer& layer : shared_) {
        Matrix next(rows, layer.w.cols);
        affine(current.data.data(), rows, current.cols, layer, next.data.data());
        apply_activation(cfg_.activation, next.data.data(), next.data.size());
        current = std::move(next);
    }

    HeadOutputs out;
    out.heads.reserve(heads_.size());
    for (std::size_t h = 0; h < heads_.size(); ++h) {
        const DenseLayer& layer = heads_[h];
        Matrix z(rows, layer.w.cols);
        affine(current.data.data(), rows, current.cols, layer, z.data.data());
        if (cfg_.heads[h].kind == HeadKind::Binary) {
            for (auto& v : z.data) v = sigmoid(v);
        } else {
            for (int r = 0; r < rows; ++r) {
                double* row = z.row(r);
                double max = row[0];
                for (int c = 1; c < z.cols; ++c) max = std::max(max, row[c]);
                double sum = 0.0;
                for (int c = 0; c < z.cols; ++c) {
                    row[c] = std::exp(row[c] - max);
                    sum += row[c];
                }
                for (int c = 0; c < z.cols; ++c) row[c] /= sum;
            }
        }
        out.heads.push_back(std::move(z));
    }
    return out;
}

LossValue MultiHeadNet::loss(const HeadOutputs& outputs, const std::vector<Matrix>& targets) const {
    if (outputs.heads.size() != cfg_.heads.size() || targets.size() != cfg_.heads.size())
        throw std::invalid_argument("loss: head count mismatch");
    LossValue lv;
    lv.per_head.resize(cfg_.heads.size(), 0.0);
    for (std::size_t h = 0; h < cfg_.heads.size(); ++h) {
        const Matrix& p = outputs.heads[h];
        const Matrix& y = targets[h];
        if (p.rows != y.rows || p.cols != y.cols) throw std::invalid_argument("loss: target shape mismatch");
        if (p.rows == 0) throw std::invalid_argument("loss: empty batch");
        double sum = 0.0;
        if (cfg_.heads[h].kind == HeadKind::Binary) {
            for (int r = 0; r < p.rows; ++r)
                sum -= y.at(r, 0) * log_clipped(p.at(r, 0)) + (1.0 - y.at(r, 0)) * log_clipped(1.0 - p.at(r, 0));
        } else {
            for (int r = 0; r < p.rows; ++r) {
                const double* pr = p.row(r);
                const double* yr = y.row(r);
                for (int c = 0; c < p.cols; ++c)
                    if (yr[c] != 0.0) sum -= yr[c] * log_clipped(pr[c]);
            }
        }
        lv.per_head[h] = sum / p.rows;
        if (cfg_.heads[h].loss_weight != 0.0) lv.total += cfg_.heads[h].loss_weight * lv.per_head[h];
    }
    return lv;
}

namespace {

struct BlockResult {
    Gradients grads;
    std::vector<double> loss_sums;  // per head, summed over block rows
};

}  // namespace

Gradients MultiHeadNet::backward(const Matrix& inputs, const std::vector<Matrix>& targets, int threads,
                                 LossValue* loss_out) const {
    if (inputs.cols != cfg_.input_dim) throw std::invalid_argument("backward: input width mismatch");
    if (targets.size() != cfg_.heads.size()) throw std::invalid_argument("backward: head count mismatch");
    for (std::size_t h = 0; h < targets.size(); ++h)
        if (targets[h].rows != inputs.rows || targets[h].cols != cfg_.heads[h].classes)
            throw std::invalid_argument("backward: target shape mismatch");
    const int total_rows = inputs.rows;
    if (total_rows == 0) throw std::invalid_argument("backward: empty batch");

    const int n_blocks = (total_rows + kRowBlock - 1) / kRowBlock;
    std::vector<BlockResult> results(static_cast<std::size_t>(n_blocks));

    auto process_block = [&](int block) {
        const int r0 = block * kRowBlock;
        const int rows = std::min(kRowBlock, total_rows - r0);
        BlockResult& res = results[static_cast<std::size_t>(block)];
        res.grads = zero_gradients(shared_, heads_);
        res.loss_sums.assign(cfg_.heads.size(), 0.0);

        // Trunk forward with cached activations.
        std::vector<Matrix> acts(shared_.size());
        const double* src = inputs.row(r0);
        int src_width = inputs.cols;
        for (std::size_t t = 0; t < shared_.size(); ++t) {
            acts[t] = Matrix(rows, shared_[t].w.cols);
            affine(src, rows, src_width, shared_[t], acts[t].data.data());
            apply_activation(cfg_.activation, acts[t].data.data(), acts[t].data.size());
            check_finite(acts[t].data.data(), acts[t].data.size(), "shared layer");
            src = acts[t].data.data();
            src_width = acts[t].cols;
        }
        const Matrix& last = acts.back();

        Matrix delta_last(rows, last.cols);
        const double inv_batch = 1.0 / static_cast<double>(total_rows);
        bool delta_written = false;

        for (std::size_t h = 0; h < heads_.size(); ++h) {
            const HeadSpec& spec = cfg_.heads[h];
            Matrix out(rows, heads_[h].w.cols);
            affine(last.data.data(), rows, last.cols, heads_[h], out.data.data());
            check_finite(out.data.data(), out.data.size(), "head layer");

            const Matrix& y = targets[h];
            double loss_sum = 0.0;
            if (spec.kind == HeadKind::Binary) {
                for (int r = 0; r < rows; ++r) {
                    const double p = sigmoid(out.at(r, 0));
                    const double target = y.at(r0 + r, 0);
                    loss_sum -= target * log_clipped(p) + (1.0 - target) * log_clipped(1.0 - p);
                    out.at(r, 0) = p - target;  // becomes dZ below
                }
            } else {
                for (int r = 0; r < rows; ++r) {
                    double* row = out.row(r);
                    const double* yr = y.row(r0 + r);
                    double max = row[0];
                    for (int c = 1; c < out.cols; ++c) max = std::max(max, row[c]);
                    double sum = 0.0;
                    for (int c = 0; c < out.cols; ++c) {
                        row[c] = std::exp(row[c] - max);
                        sum += row[c];
                    }
                    for (int c = 0; c < out.cols; ++c) {
                        row[c] /= sum;
                        if (yr[c] != 0.0) loss_sum -= yr[c] * log_clipped(row[c]);
                        row[c] -= yr[c];  // dZ for softmax + cross entropy
                    }
                }
            }
            res.loss_sums[h] = loss_sum;

            // Heads with zero weight contribute exactly nothing.
            if (spec.loss_weight == 0.0) continue;
            const double scale = spec.loss_weight * inv_batch;
            for (auto& v : out.data) v *= scale;

            accumulate_layer_grad(last.data.data(), rows, last.cols, out.data.data(), out.cols,
                                  res.grads.heads[h]);
            backprop_input(out.data.data(), rows, out.cols, heads_[h].w, delta_last.data.data(),
                           delta_written);
            delta_written = true;
        }
        if (!delta_written) delta_last.fill(0.0);

        // Trunk backward.
        Matrix delta = std::move(delta_last);
        for (std::size_t t = shared_.size(); t-- > 0;) {
            mask_by_activation(cfg_.activation, acts[t].data.data(), delta.data.data(), delta.data.size());
            const double* below = t == 0 ? inputs.row(r0) : acts[t - 1].data.data();
            const int below_width = t == 0 ? inputs.cols : acts[t - 1].cols;
            accumulate_layer_grad(below, rows, below_width, delta.data.data(), delta.cols,
                                  res.grads.shared[t]);
            if (t > 0) {
                Matrix next(rows, below_width);
                backprop_input(delta.data.data(), rows, delta.cols, shared_[t].w, next.data.data(), false);
                delta = std::move(next);
            }
        }
    };

    const int worker_count = std::min(resolve_threads(threads), n_blocks);
    if (worker_count <= 1) {
        for (int b = 0; b < n_blocks; ++b) process_block(b);
    } else {
        std::atomic<int> next_block{0};
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(worker_count));
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(worker_count));
        for (int w = 0; w < worker_count; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (;;) {
                        const int b = next_block.fetch_add(1);
                        if (b >= n_blocks) return;
                        process_block(b);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& worker : workers) worker.join();
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    // Fixed-order reduction keeps results identical for any thread count.
    Gradients total = std::move(results[0].grads);
    std::vector<double> loss_sums = std::move(results[0].loss_sums);
    for (int b = 1; b < n_blocks; ++b) {
        for (std::size_t i = 0; i < total.shared.size(); ++i)
            add_into(total.shared[i], results[static_cast<std::size_t>(b)].grads.shared[i]);
        for (std::size_t i = 0; i < total.heads.size(); ++i)
            add_into(total.heads[i], results[static_cast<std::size_t>(b)].grads.heads[i]);
        for (std::size_t h = 0; h < loss_sums.size(); ++h)
            loss_sums[h] += results[static_cast<std::size_t>(b)].loss_sums[h];
    }

    if (loss_out != nullptr) {
        loss_out->per_head.assign(cfg_.heads.size(), 0.0);
        loss_out->total = 0.0;
        for (std::size_t h = 0; h < cfg_.heads.size(); ++h) {
            loss_out->per_head[h] = loss_sums[h] / total_rows;
            if (cfg_.heads[h].loss_weight != 0.0)
                loss_out->total += cfg_.heads[h].loss_weight * loss_out->per_head[h];
        }
    }
    return total;
}

void MultiHeadNet::adam_step(const Gradients& grads, std::uint64_t t, const TrainConfig& cfg) {
    if (t < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
    if (grads.shared.size() != shared_.size() || grads.heads.size() != heads_.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    if (!moments_ready_) {
        moment1_ = zero_gradients(shared_, heads_);
        moment2_ = zero_gradients(shared_, heads_);
        moments_ready_ = true;
    }
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

    auto update_tensor = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                             std::vector<double>& v) {
        if (p.size() != g.size()) throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
            if (!std::isfinite(p[i])) throw std::runtime_error("adam_step: non-finite parameter update");
        }
    };

    for (std::size_t l = 0; l < shared_.size(); ++l) {
        update_tensor(shared_[l].w.data, grads.shared[l].w.data, moment1_.shared[l].w.data,
                      moment2_.shared[l].w.data);
        update_tensor(shared_[l].b, grads.shared[l].b, moment1_.shared[l].b, moment2_.shared[l].b);
    }
    for (std::size_t l = 0; l < heads_.size(); ++l) {
        update_tensor(heads_[l].w.data, grads.heads[l].w.data, moment1_.heads[l].w.data,
                      moment2_.heads[l].w.data);
        update_tensor(heads_[l].b, grads.heads[l].b, moment1_.heads[l].b, moment2_.heads[l].b);
    }
}

namespace {

std::vector<Bit> binary_head_bits(const HeadOutputs& outputs) {
    const Matrix& p = outputs.heads.at(0);
    std::vector<Bit> bits(static_cast<std::size_t>(p.rows));
    for (int r = 0; r < p.rows; ++r) bits[static_cast<std::size_t>(r)] = p.at(r, 0) >= 0.5 ? 1 : 0;
    return bits;
}

Matrix copy_rows(const Matrix& src, int r0, int rows) {
    Matrix out(rows, src.cols);
    std::memcpy(out.data.data(), src.row(r0), sizeof(double) * out.data.size());
    return out;
}

}  // namespace

EvalResult evaluate(const MultiHeadNet& net, const EncodedBatch& batch, const ResponseExtractor& extractor) {
    const int rows = batch.row_count();
    if (rows == 0) throw std::invalid_argument("evaluate: empty batch");
    if (!extractor && (net.config().heads.empty() || net.config().heads[0].kind != HeadKind::Binary))
        throw std::invalid_argument("evaluate: no binary head and no response extractor");

    EvalResult result;
    const std::size_t head_count = net.config().heads.size();
    result.loss_per_head.assign(head_count, 0.0);
    result.acc_per_head.assign(head_count, 0.0);
    std::size_t response_hits = 0;

    for (int r0 = 0; r0 < rows; r0 += kEvalChunk) {
        const int chunk = std::min(kEvalChunk, rows - r0);
        HeadOutputs outputs = net.forward(copy_rows(batch.inputs, r0, chunk));

        for (std::size_t h = 0; h < head_count; ++h) {
            const Matrix& p = outputs.heads[h];
            const Matrix& y = batch.targets.at(h);
            double loss_sum = 0.0;
            std::size_t hits = 0;
            if (net.config().heads[h].kind == HeadKind::Binary) {
                for (int r = 0; r < chunk; ++r) {
                    const double target = y.at(r0 + r, 0);
                    const double prob = p.at(r, 0);
                    loss_sum -= target * log_clipped(prob) + (1.0 - target) * log_clipped(1.0 - prob);
                    hits += (prob >= 0.5) == (target >= 0.5);
                }
            } else {
                for (int r = 0; r < chunk; ++r) {
                    const double* pr = p.row(r);
                    const double* yr = y.row(r0 + r);
                    int pred = 0, truth = 0;
                    for (int c = 1; c < p.cols; ++c) {
                        if (pr[c] > pr[pred]) pred = c;
                        if (yr[c] > yr[truth]) truth = c;
                    }
                    loss_sum -= log_clipped(pr[truth]);
                    hits += pred == truth;
                }
            }
            result.loss_per_head[h] += loss_sum;
            result.acc_per_head[h] += static_cast<double>(hits);
        }

        const std::vector<Bit> predicted = extractor ? extractor(outputs) : binary_head_bits(outputs);
        if (predicted.size() != static_cast<std::size_t>(chunk))
            throw std::runtime_error("evaluate: response extractor returned wrong row count");
        for (int r = 0; r < chunk; ++r)
            response_hits += predicted[static_cast<std::size_t>(r)] ==
                             batch.response_bits[static_cast<std::size_t>(r0 + r)];
    }

    for (std::size_t h = 0; h < head_count; ++h) {
        result.loss_per_head[h] /= rows;
        result.acc_per_head[h] /= rows;
    }
    result.response_accuracy = static_cast<double>(response_hits) / rows;
    return result;
}

std::vector<Bit> predict_response(const MultiHeadNet& net, const Matrix& inputs) {
    if (net.config().heads.empty() || net.config().heads[0].kind != HeadKind::Binary)
        throw std::invalid_argument("predict_response: net has no binary response head");
    std::vector<Bit> bits;
    bits.reserve(static_cast<std::size_t>(inputs.rows));
    for (int r0 = 0; r0 < inputs.rows; r0 += kEvalChunk) {
        const int chunk = std::min(kEvalChunk, inputs.rows - r0);
        const HeadOutputs outputs = net.forward(copy_rows(inputs, r0, chunk));
        const std::vector<Bit> chunk_bits = binary_head_bits(outputs);
        bits.insert(bits.end(), chunk_bits.begin(), chunk_bits.end());
    }
    return bits;
}

TrainHistory train(MultiHeadNet& net, const EncodedBatch& train_set, const EncodedBatch& validation_set,
                   const TrainConfig& cfg, const ResponseExtractor& extractor) {
    cfg.validate();
    if (train_set.row_count() == 0 || validation_set.row_count() == 0)
        throw std::invalid_argument("train: empty dataset");
    for (const EncodedBatch* part : {&train_set, &validation_set})
        for (SplitTag tag : part->tags)
            if (tag == SplitTag::Test) throw std::logic_error("train: test-split rows reached training");
    if (train_set.targets.size() != net.config().heads.size())
        throw std::invalid_argument("train: target count does not match head count");

    const int n = train_set.row_count();
    const int threads = cfg.threads;
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);

    TrainHistory history;
    std::vector<DenseLayer> best_shared = net.shared_layers();
    std::vector<DenseLayer> best_heads = net.head_layers();
    double best_acc = -1.0;
    int since_best = 0;
    std::uint64_t step = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 0x100000ULL + static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[shuffle_rng.next_below(i)]);

        double loss_sum = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int rows = std::min(cfg.batch_size, n - start);
            Matrix bx(rows, train_set.inputs.cols);
            std::vector<Matrix> by;
            by.reserve(train_set.targets.size());
            for (const Matrix& t : train_set.targets) by.emplace_back(rows, t.cols);
            for (int r = 0; r < rows; ++r) {
                const int src = perm[static_cast<std::size_t>(start + r)];
                std::memcpy(bx.row(r), train_set.inputs.row(src),
                            sizeof(double) * static_cast<std::size_t>(bx.cols));
                for (std::size_t h = 0; h < by.size(); ++h)
                    std::memcpy(by[h].row(r), train_set.targets[h].row(src),
                                sizeof(double) * static_cast<std::size_t>(by[h].cols));
            }
            LossValue lv;
            const Gradients grads = net.backward(bx, by, threads, &lv);
            net.adam_step(grads, ++step, cfg);
            loss_sum += lv.total * rows;
        }

        const EvalResult val = evaluate(net, validation_set, extractor);
        EpochStats stats;
        stats.train_loss = loss_sum / n;
        stats.val_loss_per_head = val.loss_per_head;
        stats.val_acc_per_head = val.acc_per_head;
        stats.val_response_accuracy = val.response_accuracy;
        history.epochs.push_back(std::move(stats));

        if (val.response_accuracy > best_acc) {
            best_acc = val.response_accuracy;
            best_shared = net.shared_layers();
            best_heads = net.head_layers();
            history.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    net.shared_layers() = std::move(best_shared);
    net.head_layers() = std::move(best_heads);
    history.best_val_response_accuracy = best_acc;
    return history;
}

namespace {

void write_doubles(std::ostream& out, const std::vector<double>& values) {
    for (double value : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &value, 8);
        std::array<unsigned char, 8> raw{};
        for (int i = 0; i < 8; ++i) raw[static_cast<std::size_t>(i)] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(raw.data()), 8);
    }
}

void read_doubles(std::istream& in, std::vector<double>& values, const std::string& path) {
    for (double& value : values) {
        std::array<unsigned char, 8> raw{};
        if (!in.read(reinterpret_cast<char*>(raw.data()), 8))
            throw std::runtime_error(path + ": truncated checkpoint");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(raw[static_cast<std::size_t>(i)]) << (8 * i);
        std::memcpy(&value, &bits, 8);
    }
}

}  // namespace

void MultiHeadNet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save: cannot open " + path);
    out << "MHNET1\n";
    out << "input_dim " << cfg_.input_dim << "\n";
    out << "hidden ";
    for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) out << (i ? "," : "") << cfg_.hidden[i];
    out << "\n";
    out << "activation " << activation_name(cfg_.activation) << "\n";
    out << "heads ";
    char buf[64];
    for (std::size_t i = 0; i < cfg_.heads.size(); ++i) {
        const HeadSpec& h = cfg_.heads[i];
        std::snprintf(buf, sizeof buf, "%a", h.loss_weight);
        out << (i ? ";" : "") << (h.kind == HeadKind::Binary ? "binary" : "categorical") << ":" << h.classes
            << ":" << buf;
    }
    out << "\n";
    std::size_t count = 0;
    for (const auto& l : shared_) count += l.w.data.size() + l.b.size();
    for (const auto& l : heads_) count += l.w.data.size() + l.b.size();
    out << "params " << count << "\n";
    for (const auto& l : shared_) {
        write_doubles(out, l.w.data);
        write_doubles(out, l.b);
    }
    for (const auto& l : heads_) {
        write_doubles(out, l.w.data);
        write_doubles(out, l.b);
    }
    if (!out) throw std::runtime_error("save: write failed for " + path);
}

MultiHeadNet MultiHeadNet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load: cannot open " + path);
    std::string line;
    auto expect_line = [&](const char* what) {
        if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated checkpoint header");
        const std::string prefix = std::string(what) + " ";
        if (line.rfind(prefix, 0) != 0)
            throw std::runtime_error(path + ": expected '" + what + "' in checkpoint header");
        return line.substr(prefix.size());
    };

    if (!std::getline(in, line) || line != "MHNET1")
        throw std::runtime_error(path + ": not a MHNET1 checkpoint");

    NetConfig cfg;
    cfg.input_dim = std::stoi(expect_line("input_dim"));
    {
        std::istringstream hs(expect_line("hidden"));
        std::string item;
        while (std::getline(hs, item, ',')) cfg.hidden.push_back(std::stoi(item));
    }
    cfg.activation = parse_activation(expect_line("activation"));
    {
        std::istringstream hs(expect_line("heads"));
        std::string item;
        while (std::getline(hs, item, ';')) {
            const auto c1 = item.find(':');
            const auto c2 = item.find(':', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw std::runtime_error(path + ": malformed head spec");
            HeadSpec head;
            const std::string kind = item.substr(0, c1);
            if (kind == "binary")
                head.kind = HeadKind::Binary;
            else if (kind == "categorical")
                head.kind = HeadKind::Categorical;
            else
                throw std::runtime_error(path + ": unknown head kind '" + kind + "'");
            head.classes = std::stoi(item.substr(c1 + 1, c2 - c1 - 1));
            head.loss_weight = std::strtod(item.substr(c2 + 1).c_str(), nullptr);
            cfg.heads.push_back(head);
        }
    }
    const std::size_t declared = std::stoull(expect_line("params"));

    MultiHeadNet net(cfg, 0);
    std::size_t count = 0;
    for (const auto& l : net.shared_) count += l.w.data.size() + l.b.size();
    for (const auto& l : net.heads_) count += l.w.data.size() + l.b.size();
    if (count != declared) throw std::runtime_error(path + ": parameter count mismatch");
    for (auto& l : net.shared_) {
        read_doubles(in, l.w.data, path);
        read_doubles(in, l.b, path);
    }
    for (auto& l : net.heads_) {
        read_doubles(in, l.w.data, path);
        read_doubles(in, l.b, path);
    }
    return net;
}

const char* activation_name(Activation a) { return a == Activation::Rectifier ? "relu" : "tanh"; }

Activation parse_activation(const std::string& name) {
    if (name == "relu" || name == "rectifier") return Activation::Rectifier;
    if (name == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation '" + name + "'");
}

}  // namespace pufatt
