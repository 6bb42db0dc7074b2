#include "scene2prompt/hiervis.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

Eigen::MatrixXd layer_norm(const Eigen::MatrixXd& x, const LayerNormParams& p,
                           LayerNormCache& cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    cache.input = x;
    cache.x_hat.resize(n, d);
    cache.inv_std.resize(n);
    Eigen::MatrixXd out(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double inv_std = 1.0 / std::sqrt(var + kLnEps);
        cache.inv_std(i) = inv_std;
        cache.x_hat.row(i) = (x.row(i).array() - mu) * inv_std;
        out.row(i) = cache.x_hat.row(i).cwiseProduct(p.gain.row(0)) + p.bias.row(0);
    }
    return out;
}

Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& d_out,
                                    const LayerNormParams& p,
                                    const LayerNormCache& cache,
                                    LayerNormParams& grads) {
    const Eigen::Index n = d_out.rows();
    const Eigen::Index d = d_out.cols();
    grads.gain.row(0) += (d_out.array() * cache.x_hat.array()).colwise().sum().matrix();
    grads.bias.row(0) += d_out.colwise().sum();
    Eigen::MatrixXd dx(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVectorXd d_hat = d_out.row(i).cwiseProduct(p.gain.row(0));
        const double mean_d = d_hat.mean();
        const double mean_dx = d_hat.cwiseProduct(cache.x_hat.row(i)).mean();
        dx.row(i) = cache.inv_std(i) *
                    (d_hat.array() - mean_d - cache.x_hat.row(i).array() * mean_dx);
    }
    return dx;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd out(scores.rows(), scores.cols());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        const Eigen::RowVectorXd shifted =
            scores.row(i).array() - scores.row(i).maxCoeff();
        const Eigen::RowVectorXd e = shifted.array().exp();
        out.row(i) = e / e.sum();
    }
    return out;
}

// dS = A .* (dA - rowsum(dA .* A))
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& attn,
                                 const Eigen::MatrixXd& d_attn) {
    Eigen::MatrixXd out(attn.rows(), attn.cols());
    for (Eigen::Index i = 0; i < attn.rows(); ++i) {
        const double dot = d_attn.row(i).dot(attn.row(i));
        out.row(i) = attn.row(i).array() * (d_attn.row(i).array() - dot);
    }
    return out;
}

void check_block_inputs(const AttentionBlockParams& params,
                        const Eigen::MatrixXd& queries,
                        const Eigen::MatrixXd& keys_values) {
    if (queries.cols() != params.dim || keys_values.cols() != params.dim) {
        throw std::invalid_argument("attention input dim mismatch: expected " +
                                    std::to_string(params.dim));
    }
    if (keys_values.rows() < 1) {
        throw std::invalid_argument("attention needs at least one key");
    }
}

void xavier_fill(Eigen::MatrixXd& m, Eigen::Index fan_in, Eigen::Index fan_out,
                 std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = dist(rng);
        }
    }
}

AttentionBlockParams make_block(int dim, int heads, std::mt19937_64& rng) {
    AttentionBlockParams b = AttentionBlockParams::zeros(dim, heads);
    b.ln_query.gain.setOnes();
    b.ln_kv.gain.setOnes();
    b.ln_ffn.gain.setOnes();
    xavier_fill(b.wq, dim, dim, rng);
    xavier_fill(b.wk, dim, dim, rng);
    xavier_fill(b.wv, dim, dim, rng);
    xavier_fill(b.wo, dim, dim, rng);
    xavier_fill(b.w1, dim, 4 * dim, rng);
    xavier_fill(b.w2, 4 * dim, dim, rng);
    return b;
}

void collect_block(std::vector<NamedTensor>& out, const std::string& prefix,
                   AttentionBlockParams& b) {
    out.push_back({prefix + ".ln_query.gain", &b.ln_query.gain});
    out.push_back({prefix + ".ln_query.bias", &b.ln_query.bias});
    out.push_back({prefix + ".ln_kv.gain", &b.ln_kv.gain});
    out.push_back({prefix + ".ln_kv.bias", &b.ln_kv.bias});
    out.push_back({prefix + ".ln_ffn.gain", &b.ln_ffn.gain});
    out.push_back({prefix + ".ln_ffn.bias", &b.ln_ffn.bias});
    out.push_back({prefix + ".wq", &b.wq});
    out.push_back({prefix + ".wk", &b.wk});
    out.push_back({prefix + ".wv", &b.wv});
    out.push_back({prefix + ".wo", &b.wo});
    out.push_back({prefix + ".bq", &b.bq});
    out.push_back({prefix + ".bk", &b.bk});
    out.push_back({prefix + ".bv", &b.bv});
    out.push_back({prefix + ".bo", &b.bo});
    out.push_back({prefix + ".w1", &b.w1});
    out.push_back({prefix + ".b1", &b.b1});
    out.push_back({prefix + ".w2", &b.w2});
    out.push_back({prefix + ".b2", &b.b2});
}

}  // namespace

AttentionBlockParams AttentionBlockParams::zeros(int dim, int heads) {
    if (dim <= 0 || heads <= 0 || dim % heads != 0) {
        throw std::invalid_argument("dim must be positive and divisible by heads");
    }
    AttentionBlockParams b;
    b.dim = dim;
    b.heads = heads;
    for (auto* ln : {&b.ln_query, &b.ln_kv, &b.ln_ffn}) {
        ln->gain = Eigen::MatrixXd::Zero(1, dim);
        ln->bias = Eigen::MatrixXd::Zero(1, dim);
    }
    b.wq = Eigen::MatrixXd::Zero(dim, dim);
    b.wk = Eigen::MatrixXd::Zero(dim, dim);
    b.wv = Eigen::MatrixXd::Zero(dim, dim);
    b.wo = Eigen::MatrixXd::Zero(dim, dim);
    b.bq = Eigen::MatrixXd::Zero(1, dim);
    b.bk = Eigen::MatrixXd::Zero(1, dim);
    b.bv = Eigen::MatrixXd::Zero(1, dim);
    b.bo = Eigen::MatrixXd::Zero(1, dim);
    b.w1 = Eigen::MatrixXd::Zero(dim, 4 * dim);
    b.b1 = Eigen::MatrixXd::Zero(1, 4 * dim);
    b.w2 = Eigen::MatrixXd::Zero(4 * dim, dim);
    b.b2 = Eigen::MatrixXd::Zero(1, dim);
    return b;
}

BlockForward cross_attention_block(const AttentionBlockParams& params,
                                   const Eigen::MatrixXd& queries,
                                   const Eigen::MatrixXd& keys_values) {
    check_block_inputs(params, queries, keys_values);
    const Eigen::Index n_q = queries.rows();
    const int dh = params.dim / params.heads;
    const double scale = 1.0 / std::sqrt(double(dh));

    BlockForward f;
    BlockCache& c = f.cache;
    c.q_in = queries;
    c.kv_in = keys_values;

    c.qn = layer_norm(queries, params.ln_query, c.ln_q);
    c.kn = layer_norm(keys_values, params.ln_kv, c.ln_kv);
    c.q = (c.qn * params.wq).rowwise() + params.bq.row(0);
    c.k = (c.kn * params.wk).rowwise() + params.bk.row(0);
    c.v = (c.kn * params.wv).rowwise() + params.bv.row(0);

    c.heads_out.resize(n_q, params.dim);
    c.attn.resize(params.heads);
    for (int h = 0; h < params.heads; ++h) {
        const auto q_h = c.q.middleCols(h * dh, dh);
        const auto k_h = c.k.middleCols(h * dh, dh);
        const auto v_h = c.v.middleCols(h * dh, dh);
        c.attn[h] = softmax_rows(q_h * k_h.transpose() * scale);
        c.heads_out.middleCols(h * dh, dh) = c.attn[h] * v_h;
    }
    const Eigen::MatrixXd attn_out =
        (c.heads_out * params.wo).rowwise() + params.bo.row(0);
    c.r1 = queries + attn_out;

    c.fn = layer_norm(c.r1, params.ln_ffn, c.ln_ffn);
    c.ffn_pre = (c.fn * params.w1).rowwise() + params.b1.row(0);
    c.ffn_act = c.ffn_pre.unaryExpr([](double x) { return gelu(x); });
    f.out = c.r1 + ((c.ffn_act * params.w2).rowwise() + params.b2.row(0));
    return f;
}

BlockBackward cross_attention_block_backward(const AttentionBlockParams& params,
                                             const BlockCache& cache,
                                             const Eigen::MatrixXd& d_out,
                                             AttentionBlockParams& grads) {
    const int dh = params.dim / params.heads;
    const double scale = 1.0 / std::sqrt(double(dh));

    // out = r1 + gelu(fn*w1 + b1)*w2 + b2
    grads.b2.row(0) += d_out.colwise().sum();
    grads.w2 += cache.ffn_act.transpose() * d_out;
    const Eigen::MatrixXd d_act = d_out * params.w2.transpose();
    const Eigen::MatrixXd d_pre = d_act.cwiseProduct(
        cache.ffn_pre.unaryExpr([](double x) { return gelu_grad(x); }));
    grads.b1.row(0) += d_pre.colwise().sum();
    grads.w1 += cache.fn.transpose() * d_pre;
    const Eigen::MatrixXd d_fn = d_pre * params.w1.transpose();

    Eigen::MatrixXd d_r1 = d_out;  // direct residual
    d_r1 += layer_norm_backward(d_fn, params.ln_ffn, cache.ln_ffn, grads.ln_ffn);

    // r1 = q_in + heads_out*wo + bo
    grads.bo.row(0) += d_r1.colwise().sum();
    grads.wo += cache.heads_out.transpose() * d_r1;
    const Eigen::MatrixXd d_heads = d_r1 * params.wo.transpose();

    Eigen::MatrixXd d_q = Eigen::MatrixXd::Zero(cache.q.rows(), params.dim);
    Eigen::MatrixXd d_k = Eigen::MatrixXd::Zero(cache.k.rows(), params.dim);
    Eigen::MatrixXd d_v = Eigen::MatrixXd::Zero(cache.v.rows(), params.dim);
    for (int h = 0; h < params.heads; ++h) {
        const auto q_h = cache.q.middleCols(h * dh, dh);
        const auto k_h = cache.k.middleCols(h * dh, dh);
        const auto v_h = cache.v.middleCols(h * dh, dh);
        const auto d_o = d_heads.middleCols(h * dh, dh);
        const Eigen::MatrixXd& attn = cache.attn[h];

        const Eigen::MatrixXd d_attn = d_o * v_h.transpose();
        d_v.middleCols(h * dh, dh) = attn.transpose() * d_o;
        const Eigen::MatrixXd d_scores = softmax_backward(attn, d_attn);
        d_q.middleCols(h * dh, dh) = d_scores * k_h * scale;
        d_k.middleCols(h * dh, dh) = d_scores.transpose() * q_h * scale;
    }

    // q = qn*wq + bq; k/v likewise from kn
    grads.bq.row(0) += d_q.colwise().sum();
    grads.bk.row(0) += d_k.colwise().sum();
    grads.bv.row(0) += d_v.colwise().sum();
    grads.wq += cache.qn.transpose() * d_q;
    grads.wk += cache.kn.transpose() * d_k;
    grads.wv += cache.kn.transpose() * d_v;

    const Eigen::MatrixXd d_qn = d_q * params.wq.transpose();
    const Eigen::MatrixXd d_kn =
        d_k * params.wk.transpose() + d_v * params.wv.transpose();

    BlockBackward back;
    back.d_queries = d_r1;  // residual path into the raw query stream
    back.d_queries += layer_norm_backward(d_qn, params.ln_query, cache.ln_q, grads.ln_query);
    back.d_keys_values = layer_norm_backward(d_kn, params.ln_kv, cache.ln_kv, grads.ln_kv);
    return back;
}

Eigen::MatrixXd view_tokens_forward(const HierarchyModel& model,
                                    const std::vector<Eigen::MatrixXd>& patches,
                                    std::vector<BlockCache>* caches) {
    if (int(patches.size()) != model.n_views) {
        throw std::invalid_argument("expected " + std::to_string(model.n_views) +
                                    " views, got " + std::to_string(patches.size()));
    }
    Eigen::MatrixXd tokens(model.n_views, model.dim);
    if (caches) {
        caches->clear();
        caches->resize(model.n_views);
    }
    for (int m = 0; m < model.n_views; ++m) {
        auto f = cross_attention_block(model.view_block,
                                       model.queries.view_queries.row(m), patches[m]);
        tokens.row(m) = f.out.row(0);
        if (caches) {
            (*caches)[m] = std::move(f.cache);
        }
    }
    return tokens;
}

Eigen::MatrixXd scene_token_forward(const HierarchyModel& model,
                                    const Eigen::MatrixXd& view_tokens,
                                    BlockCache* cache) {
    if (view_tokens.rows() != model.n_views) {
        throw std::invalid_argument("scene token needs exactly " +
                                    std::to_string(model.n_views) + " view tokens");
    }
    auto f = cross_attention_block(model.scene_block, model.queries.scene_query,
                                   view_tokens);
    if (cache) {
        *cache = std::move(f.cache);
    }
    return f.out;
}

FeatureHierarchy assemble_hierarchy(const std::vector<Eigen::MatrixXd>& patches,
                                    const Eigen::MatrixXd& view_tokens,
                                    const Eigen::MatrixXd& scene_token) {
    const Eigen::Index d = view_tokens.cols();
    Eigen::Index total = view_tokens.rows() + 1;
    for (const auto& p : patches) {
        if (p.cols() != d) {
            throw std::invalid_argument("patch dim does not match token dim");
        }
        total += p.rows();
    }
    if (scene_token.rows() != 1 || scene_token.cols() != d) {
        throw std::invalid_argument("scene token must be 1 x dim");
    }
    FeatureHierarchy h;
    h.patches = patches;
    h.view_tokens = view_tokens;
    h.scene_token = scene_token;
    h.f_v.resize(total, d);
    Eigen::Index row = 0;
    for (const auto& p : patches) {
        h.f_v.middleRows(row, p.rows()) = p;
        row += p.rows();
    }
    h.f_v.middleRows(row, view_tokens.rows()) = view_tokens;
    row += view_tokens.rows();
    h.f_v.row(row) = scene_token.row(0);
    return h;
}

HierarchyForward hierarchy_forward(const HierarchyModel& model,
                                   const std::vector<Eigen::MatrixXd>& patches) {
    HierarchyForward f;
    const Eigen::MatrixXd view_tokens =
        view_tokens_forward(model, patches, &f.view_caches);
    const Eigen::MatrixXd scene = scene_token_forward(model, view_tokens, &f.scene_cache);
    f.hierarchy = assemble_hierarchy(patches, view_tokens, scene);
    return f;
}

std::vector<Eigen::MatrixXd> hierarchy_backward(const HierarchyModel& model,
                                                const HierarchyForward& forward,
                                                const Eigen::MatrixXd& d_f_v,
                                                HierarchyModel& grads) {
    const auto& h = forward.hierarchy;
    if (d_f_v.rows() != h.f_v.rows() || d_f_v.cols() != h.f_v.cols()) {
        throw std::invalid_argument("d_f_v shape does not match f_v");
    }
    // Split the concatenation gradient back into its parts.
    std::vector<Eigen::MatrixXd> d_patches(h.patches.size());
    Eigen::Index row = 0;
    for (std::size_t m = 0; m < h.patches.size(); ++m) {
        d_patches[m] = d_f_v.middleRows(row, h.patches[m].rows());
        row += h.patches[m].rows();
    }
    Eigen::MatrixXd d_view_tokens = d_f_v.middleRows(row, model.n_views);
    row += model.n_views;
    const Eigen::MatrixXd d_scene = d_f_v.row(row);

    auto scene_back = cross_attention_block_backward(model.scene_block,
                                                     forward.scene_cache, d_scene,
                                                     grads.scene_block);
    grads.queries.scene_query += scene_back.d_queries;
    d_view_tokens += scene_back.d_keys_values;

    for (int m = 0; m < model.n_views; ++m) {
        auto view_back = cross_attention_block_backward(
            model.view_block, forward.view_caches[m], d_view_tokens.row(m),
            grads.view_block);
        grads.queries.view_queries.row(m) += view_back.d_queries;
        d_patches[m] += view_back.d_keys_values;
    }
    return d_patches;
}

DecoderForward toy_decoder_loss(const ToyDecoder& decoder, const Eigen::MatrixXd& f_v,
                                const std::vector<int>& context_ids,
                                const std::vector<int>& target_ids) {
    const int L = int(target_ids.size());
    if (L < 1) {
        throw std::invalid_argument("target sequence must be nonempty");
    }
    if (L > decoder.max_len) {
        throw std::invalid_argument("target length " + std::to_string(L) +
                                    " exceeds max_len " +
                                    std::to_string(decoder.max_len));
    }
    auto check_id = [&](int id) {
        if (id < 0 || id >= decoder.vocab) {
            throw std::invalid_argument("token id " + std::to_string(id) +
                                        " outside vocabulary of size " +
                                        std::to_string(decoder.vocab));
        }
    };
    for (int id : context_ids) check_id(id);
    for (int id : target_ids) check_id(id);
    if (f_v.cols() != decoder.dim) {
        throw std::invalid_argument("f_v dim does not match decoder dim");
    }

    DecoderForward f;
    // Position i: learned position + prefix mean of [BOS, targets < i].
    f.queries.resize(L, decoder.dim);
    Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(decoder.dim);
    for (int i = 0; i < L; ++i) {
        const int prev = i == 0 ? kBosTokenId : target_ids[i - 1];
        running += decoder.token_embed.row(prev);
        f.queries.row(i) = decoder.pos_embed.row(i) + running / double(i + 1);
    }

    const int K = int(context_ids.size());
    f.memory.resize(K + f_v.rows(), decoder.dim);
    for (int j = 0; j < K; ++j) {
        f.memory.row(j) = decoder.token_embed.row(context_ids[j]);
    }
    f.memory.bottomRows(f_v.rows()) = f_v;

    auto block = cross_attention_block(decoder.block, f.queries, f.memory);
    f.block_out = block.out;
    f.block_cache = std::move(block.cache);

    const Eigen::MatrixXd logits =
        (f.block_out * decoder.w_out).rowwise() + decoder.b_out.row(0);
    f.probs = softmax_rows(logits);
    f.position_log_probs.resize(L);
    f.loss = 0.0;
    for (int i = 0; i < L; ++i) {
        const double lp = std::log(f.probs(i, target_ids[i]));
        f.position_log_probs(i) = lp;
        f.loss -= lp;
    }
    return f;
}

Eigen::MatrixXd toy_decoder_backward(const ToyDecoder& decoder,
                                     const DecoderForward& forward,
                                     const std::vector<int>& context_ids,
                                     const std::vector<int>& target_ids,
                                     ToyDecoder& grads) {
    const int L = int(target_ids.size());
    const int K = int(context_ids.size());

    // d loss / d logits = softmax - onehot(target), per row.
    Eigen::MatrixXd d_logits = forward.probs;
    for (int i = 0; i < L; ++i) {
        d_logits(i, target_ids[i]) -= 1.0;
    }
    grads.b_out.row(0) += d_logits.colwise().sum();
    grads.w_out += forward.block_out.transpose() * d_logits;
    const Eigen::MatrixXd d_block_out = d_logits * decoder.w_out.transpose();

    auto back = cross_attention_block_backward(decoder.block, forward.block_cache,
                                               d_block_out, grads.block);

    // memory = [context embeddings; f_v]
    for (int j = 0; j < K; ++j) {
        grads.token_embed.row(context_ids[j]) += back.d_keys_values.row(j);
    }
    const Eigen::MatrixXd d_f_v =
        back.d_keys_values.bottomRows(back.d_keys_values.rows() - K);

    // queries: pos + prefix mean of [BOS, targets < i]
    for (int i = 0; i < L; ++i) {
        grads.pos_embed.row(i) += back.d_queries.row(i);
    }
    for (int i = L - 1; i >= 0; --i) {
        const Eigen::RowVectorXd d_mean = back.d_queries.row(i) / double(i + 1);
        for (int j = 0; j <= i; ++j) {
            const int prev = j == 0 ? kBosTokenId : target_ids[j - 1];
            grads.token_embed.row(prev) += d_mean;
        }
    }
    return d_f_v;
}

SceneQaModel make_model(const ModelConfig& config, std::uint64_t seed) {
    if (config.dim < 1 || config.dim % config.heads != 0) {
        throw std::invalid_argument("dim must be divisible by heads");
    }
    if (config.vocab < 2) {
        throw std::invalid_argument("vocabulary must have at least 2 entries");
    }
    std::mt19937_64 rng(seed);
    SceneQaModel m;
    m.hierarchy.dim = config.dim;
    m.hierarchy.heads = config.heads;
    m.hierarchy.n_views = config.n_views;
    m.hierarchy.view_block = make_block(config.dim, config.heads, rng);
    m.hierarchy.scene_block = make_block(config.dim, config.heads, rng);
    m.hierarchy.queries.view_queries.resize(config.n_views, config.dim);
    m.hierarchy.queries.scene_query.resize(1, config.dim);
    xavier_fill(m.hierarchy.queries.view_queries, config.dim, config.dim, rng);
    xavier_fill(m.hierarchy.queries.scene_query, config.dim, config.dim, rng);

    m.decoder.dim = config.dim;
    m.decoder.heads = config.heads;
    m.decoder.vocab = config.vocab;
    m.decoder.max_len = config.max_len;
    m.decoder.token_embed.resize(config.vocab, config.dim);
    m.decoder.pos_embed.resize(config.max_len, config.dim);
    xavier_fill(m.decoder.token_embed, config.vocab, config.dim, rng);
    xavier_fill(m.decoder.pos_embed, config.max_len, config.dim, rng);
    m.decoder.block = make_block(config.dim, config.heads, rng);
    m.decoder.w_out.resize(config.dim, config.vocab);
    m.decoder.b_out = Eigen::MatrixXd::Zero(1, config.vocab);
    xavier_fill(m.decoder.w_out, config.dim, config.vocab, rng);
    return m;
}

SceneQaModel zeros_like(const SceneQaModel& model) {
    SceneQaModel z;
    z.hierarchy.dim = model.hierarchy.dim;
    z.hierarchy.heads = model.hierarchy.heads;
    z.hierarchy.n_views = model.hierarchy.n_views;
    z.hierarchy.view_block =
        AttentionBlockParams::zeros(model.hierarchy.dim, model.hierarchy.heads);
    z.hierarchy.scene_block =
        AttentionBlockParams::zeros(model.hierarchy.dim, model.hierarchy.heads);
    z.hierarchy.queries.view_queries =
        Eigen::MatrixXd::Zero(model.hierarchy.n_views, model.hierarchy.dim);
    z.hierarchy.queries.scene_query = Eigen::MatrixXd::Zero(1, model.hierarchy.dim);
    z.decoder.dim = model.decoder.dim;
    z.decoder.heads = model.decoder.heads;
    z.decoder.vocab = model.decoder.vocab;
    z.decoder.max_len = model.decoder.max_len;
    z.decoder.token_embed =
        Eigen::MatrixXd::Zero(model.decoder.vocab, model.decoder.dim);
    z.decoder.pos_embed =
        Eigen::MatrixXd::Zero(model.decoder.max_len, model.decoder.dim);
    z.decoder.block = AttentionBlockParams::zeros(model.decoder.dim, model.decoder.heads);
    z.decoder.w_out = Eigen::MatrixXd::Zero(model.decoder.dim, model.decoder.vocab);
    z.decoder.b_out = Eigen::MatrixXd::Zero(1, model.decoder.vocab);
    return z;
}

std::vector<NamedTensor> named_tensors(SceneQaModel& model) {
    std::vector<NamedTensor> out;
    collect_block(out, "hierarchy.view_block", model.hierarchy.view_block);
    collect_block(out, "hierarchy.scene_block", model.hierarchy.scene_block);
    out.push_back({"hierarchy.queries.view", &model.hierarchy.queries.view_queries});
    out.push_back({"hierarchy.queries.scene", &model.hierarchy.queries.scene_query});
    out.push_back({"decoder.token_embed", &model.decoder.token_embed});
    out.push_back({"decoder.pos_embed", &model.decoder.pos_embed});
    collect_block(out, "decoder.block", model.decoder.block);
    out.push_back({"decoder.w_out", &model.decoder.w_out});
    out.push_back({"decoder.b_out", &model.decoder.b_out});
    return out;
}

LossForward model_loss(const SceneQaModel& model, const TrainExample& example) {
    LossForward f;
    f.hier = hierarchy_forward(model.hierarchy, example.patches);
    f.dec = toy_decoder_loss(model.decoder, f.hier.hierarchy.f_v, example.context_ids,
                             example.target_ids);
    f.loss = f.dec.loss;
    return f;
}

void model_backward(const SceneQaModel& model, const LossForward& forward,
                    const TrainExample& example, SceneQaModel& grads) {
    const Eigen::MatrixXd d_f_v =
        toy_decoder_backward(model.decoder, forward.dec, example.context_ids,
                             example.target_ids, grads.decoder);
    hierarchy_backward(model.hierarchy, forward.hier, d_f_v, grads.hierarchy);
}

std::vector<double> train_toy(SceneQaModel& model,
                              const std::vector<TrainExample>& examples, int steps,
                              double lr) {
    if (examples.empty()) {
        throw std::invalid_argument("need at least one training example");
    }
    std::vector<double> trace;
    trace.reserve(steps);
    auto params = named_tensors(model);
    for (int step = 0; step < steps; ++step) {
        SceneQaModel grads = zeros_like(model);
        double loss = 0.0;
        for (const auto& ex : examples) {
            const LossForward f = model_loss(model, ex);
            loss += f.loss;
            model_backward(model, f, ex, grads);
        }
        loss /= double(examples.size());
        if (!std::isfinite(loss)) {
            throw std::runtime_error("non-finite loss at step " + std::to_string(step));
        }
        trace.push_back(loss);
        auto grad_tensors = named_tensors(grads);
        for (std::size_t i = 0; i < params.size(); ++i) {
            *params[i].tensor -= lr * *grad_tensors[i].tensor;
        }
    }
    return trace;
}

Eigen::MatrixXd patchify_stub(const RenderedView& view, int grid, int dim) {
    if (dim < 6) {
        throw std::invalid_argument("patchify needs dim >= 6");
    }
    const int w = view.image.width;
    const int h = view.image.height;
    if (grid <= 0 || w % grid != 0 || h % grid != 0) {
        throw std::invalid_argument("image " + std::to_string(w) + "x" +
                                    std::to_string(h) + " not divisible by grid " +
                                    std::to_string(grid));
    }
    const int cw = w / grid;
    const int ch = h / grid;

    double max_depth = 0.0;
    for (double dpt : view.depth) {
        if (std::isfinite(dpt)) {
            max_depth = std::max(max_depth, dpt);
        }
    }

    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(grid * grid, dim);
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            double sum_r = 0.0, sum_g = 0.0, sum_b = 0.0, sum_d = 0.0;
            for (int y = gy * ch; y < (gy + 1) * ch; ++y) {
                for (int x = gx * cw; x < (gx + 1) * cw; ++x) {
                    const auto rgb = view.image.at(x, y);
                    sum_r += rgb[0];
                    sum_g += rgb[1];
                    sum_b += rgb[2];
                    const double dpt = view.depth[std::size_t(y) * w + x];
                    sum_d += std::isfinite(dpt) ? dpt : 0.0;
                }
            }
            const double cells = double(cw) * ch;
            const Eigen::Index row = Eigen::Index(gy) * grid + gx;
            out(row, 0) = sum_r / cells / 255.0;
            out(row, 1) = sum_g / cells / 255.0;
            out(row, 2) = sum_b / cells / 255.0;
            out(row, 3) = max_depth > 0.0 ? sum_d / cells / max_depth : 0.0;
            out(row, 4) = (gx + 0.5) / grid;
            out(row, 5) = (gy + 0.5) / grid;
        }
    }
    return out;
}

// --- checkpoint --------------------------------------------------------------

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(char((v >> (8 * i)) & 0xff));
    }
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(char((bits >> (8 * i)) & 0xff));
    }
}

struct Reader {
    const std::uint8_t* p;
    std::size_t size;
    std::size_t pos = 0;
    std::string where;

    void need(std::size_t n) {
        if (pos + n > size) {
            throw std::runtime_error(where + ": truncated checkpoint at offset " +
                                     std::to_string(pos));
        }
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= std::uint32_t(p[pos + i]) << (8 * i);
        }
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= std::uint64_t(p[pos + i]) << (8 * i);
        }
        pos += 8;
        return std::bit_cast<double>(v);
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const SceneQaModel& model) {
    std::string out = "S2PC";
    put_u32(out, kCheckpointVersion);
    put_u32(out, std::uint32_t(model.hierarchy.dim));
    put_u32(out, std::uint32_t(model.hierarchy.heads));
    put_u32(out, std::uint32_t(model.decoder.vocab));
    put_u32(out, std::uint32_t(model.decoder.max_len));
    put_u32(out, std::uint32_t(model.hierarchy.n_views));

    auto& mutable_model = const_cast<SceneQaModel&>(model);
    const auto tensors = named_tensors(mutable_model);
    put_u32(out, std::uint32_t(tensors.size()));
    for (const auto& t : tensors) {
        put_u32(out, std::uint32_t(t.name.size()));
        out += t.name;
        put_u32(out, std::uint32_t(t.tensor->rows()));
        put_u32(out, std::uint32_t(t.tensor->cols()));
        for (Eigen::Index r = 0; r < t.tensor->rows(); ++r) {
            for (Eigen::Index c = 0; c < t.tensor->cols(); ++c) {
                put_f64(out, (*t.tensor)(r, c));
            }
        }
    }
    write_file(path, out);
}

SceneQaModel load_checkpoint(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    Reader rd{reinterpret_cast<const std::uint8_t*>(data.data()), data.size(), 0,
              path.string()};
    if (rd.str(4) != "S2PC") {
        throw std::runtime_error(path.string() + ": bad checkpoint magic");
    }
    const std::uint32_t version = rd.u32();
    if (version != kCheckpointVersion) {
        throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));
    }
    ModelConfig config;
    config.dim = int(rd.u32());
    config.heads = int(rd.u32());
    config.vocab = int(rd.u32());
    config.max_len = int(rd.u32());
    config.n_views = int(rd.u32());

    SceneQaModel model = make_model(config, 0);
    auto tensors = named_tensors(model);
    const std::uint32_t count = rd.u32();
    if (count != tensors.size()) {
        throw std::runtime_error(path.string() + ": tensor count mismatch");
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = rd.str(rd.u32());
        const auto rows = Eigen::Index(rd.u32());
        const auto cols = Eigen::Index(rd.u32());
        if (name != tensors[i].name || rows != tensors[i].tensor->rows() ||
            cols != tensors[i].tensor->cols()) {
            throw std::runtime_error(path.string() + ": unexpected tensor '" + name +
                                     "' (" + std::to_string(rows) + "x" +
                                     std::to_string(cols) + ")");
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                (*tensors[i].tensor)(r, c) = rd.f64();
            }
        }
    }
    return model;
}

}  // namespace s2p
