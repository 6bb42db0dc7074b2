#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scene2prompt/render.hpp"

namespace s2p {

// All numerics are double precision so finite-difference gradient checks
// are meaningful.

struct LayerNormParams {
    Eigen::MatrixXd gain;  // 1 x d
    Eigen::MatrixXd bias;  // 1 x d
};

/// One pre-norm cross-attention transformer layer: LN'd queries attend to
/// LN'd keys/values through multi-head attention with a residual, then a
/// pre-norm GELU feed-forward (hidden = 4*d) with a residual.
struct AttentionBlockParams {
    int dim = 0;
    int heads = 4;
    LayerNormParams ln_query, ln_kv, ln_ffn;
    Eigen::MatrixXd wq, wk, wv, wo;  // d x d, heads concatenated
    Eigen::MatrixXd bq, bk, bv, bo;  // 1 x d
    Eigen::MatrixXd w1;              // d x 4d
    Eigen::MatrixXd b1;              // 1 x 4d
    Eigen::MatrixXd w2;              // 4d x d
    Eigen::MatrixXd b2;              // 1 x d

    static AttentionBlockParams zeros(int dim, int heads);
};

struct QueryTokens {
    Eigen::MatrixXd view_queries;  // n_views x d, one learned query per view
    Eigen::MatrixXd scene_query;   // 1 x d
};

struct HierarchyModel {
    int dim = 64;
    int heads = 4;
    int n_views = 5;
    AttentionBlockParams view_block;   // shared across the five views
    AttentionBlockParams scene_block;  // pools the five view tokens
    QueryTokens queries;
};

/// Ordered concatenation: all patch tokens view by view, then the five
/// view tokens, then the scene token.
struct FeatureHierarchy {
    std::vector<Eigen::MatrixXd> patches;  // per view, n_patches x d
    Eigen::MatrixXd view_tokens;           // n_views x d
    Eigen::MatrixXd scene_token;           // 1 x d
    Eigen::MatrixXd f_v;                   // (sum patches + n_views + 1) x d
};

// --- forward/backward ----------------------------------------------------

struct LayerNormCache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd x_hat;
    Eigen::VectorXd inv_std;
};

struct BlockCache {
    Eigen::MatrixXd q_in, kv_in;
    LayerNormCache ln_q, ln_kv, ln_ffn;
    Eigen::MatrixXd qn, kn;                 // layer-normed inputs
    Eigen::MatrixXd q, k, v;                // projected, heads concatenated
    std::vector<Eigen::MatrixXd> attn;      // per head, n_q x n_kv softmax rows
    Eigen::MatrixXd heads_out;              // n_q x d before the output projection
    Eigen::MatrixXd r1;                     // residual stream after attention
    Eigen::MatrixXd fn;                     // layer-normed r1
    Eigen::MatrixXd ffn_pre;                // fn * w1 + b1
    Eigen::MatrixXd ffn_act;                // gelu(ffn_pre)
};

struct BlockForward {
    Eigen::MatrixXd out;
    BlockCache cache;
};

BlockForward cross_attention_block(const AttentionBlockParams& params,
                                   const Eigen::MatrixXd& queries,
                                   const Eigen::MatrixXd& keys_values);

struct BlockBackward {
    Eigen::MatrixXd d_queries;
    Eigen::MatrixXd d_keys_values;
};

BlockBackward cross_attention_block_backward(const AttentionBlockParams& params,
                                             const BlockCache& cache,
                                             const Eigen::MatrixXd& d_out,
                                             AttentionBlockParams& grads);

/// Eq.-level hierarchy ops. view_tokens_forward runs each view's query over
/// that view's patches only; scene_token_forward pools the view tokens.
struct HierarchyForward {
    FeatureHierarchy hierarchy;
    std::vector<BlockCache> view_caches;
    BlockCache scene_cache;
};

Eigen::MatrixXd view_tokens_forward(const HierarchyModel& model,
                                    const std::vector<Eigen::MatrixXd>& patches,
                                    std::vector<BlockCache>* caches = nullptr);

Eigen::MatrixXd scene_token_forward(const HierarchyModel& model,
                                    const Eigen::MatrixXd& view_tokens,
                                    BlockCache* cache = nullptr);

FeatureHierarchy assemble_hierarchy(const std::vector<Eigen::MatrixXd>& patches,
                                    const Eigen::MatrixXd& view_tokens,
                                    const Eigen::MatrixXd& scene_token);

HierarchyForward hierarchy_forward(const HierarchyModel& model,
                                   const std::vector<Eigen::MatrixXd>& patches);

/// Backward through the hierarchy from a gradient on f_v. Parameter
/// gradients accumulate into `grads` (a zeros-shaped model); returns the
/// gradient w.r.t. each view's patch matrix.
std::vector<Eigen::MatrixXd> hierarchy_backward(const HierarchyModel& model,
                                                const HierarchyForward& forward,
                                                const Eigen::MatrixXd& d_f_v,
                                                HierarchyModel& grads);

// --- toy autoregressive decoder -------------------------------------------

/// Surrogate for the frozen language model: teacher-forced answer positions
/// cross-attend to [context token embeddings; f_v] and read out through a
/// linear head. Position i is built from the embeddings of targets < i
/// only (prefix mean + learned position), so causality holds by
/// construction. Token id 0 is reserved as BOS.
struct ToyDecoder {
    int dim = 64;
    int heads = 4;
    int vocab = 2;
    int max_len = 16;
    Eigen::MatrixXd token_embed;  // vocab x d
    Eigen::MatrixXd pos_embed;    // max_len x d
    AttentionBlockParams block;
    Eigen::MatrixXd w_out;  // d x vocab
    Eigen::MatrixXd b_out;  // 1 x vocab
};

inline constexpr int kBosTokenId = 0;

struct DecoderForward {
    double loss = 0.0;
    Eigen::VectorXd position_log_probs;  // log p(target_i | ...) per position
    Eigen::MatrixXd queries;             // L x d before the block
    Eigen::MatrixXd memory;              // (K + tokens(f_v)) x d
    Eigen::MatrixXd block_out;
    Eigen::MatrixXd probs;  // L x vocab softmax rows
    BlockCache block_cache;
};

DecoderForward toy_decoder_loss(const ToyDecoder& decoder, const Eigen::MatrixXd& f_v,
                                const std::vector<int>& context_ids,
                                const std::vector<int>& target_ids);

/// Returns the gradient w.r.t. f_v; decoder parameter gradients accumulate
/// into `grads`.
Eigen::MatrixXd toy_decoder_backward(const ToyDecoder& decoder,
                                     const DecoderForward& forward,
                                     const std::vector<int>& context_ids,
                                     const std::vector<int>& target_ids,
                                     ToyDecoder& grads);

// --- whole model -----------------------------------------------------------

struct SceneQaModel {
    HierarchyModel hierarchy;
    ToyDecoder decoder;
};

struct ModelConfig {
    int dim = 64;
    int heads = 4;
    int vocab = 32;
    int max_len = 16;
    int n_views = 5;
};

/// Xavier-uniform weights and queries, unit layer-norm gains, zero biases;
/// deterministic for a given seed.
SceneQaModel make_model(const ModelConfig& config, std::uint64_t seed);

SceneQaModel zeros_like(const SceneQaModel& model);

struct NamedTensor {
    std::string name;
    Eigen::MatrixXd* tensor;
};

/// Stable name -> tensor view over every trainable parameter; the order is
/// fixed and shared between a model and its gradient clone.
std::vector<NamedTensor> named_tensors(SceneQaModel& model);

struct TrainExample {
    std::vector<Eigen::MatrixXd> patches;  // n_views matrices
    std::vector<int> context_ids;
    std::vector<int> target_ids;
};

struct LossForward {
    double loss = 0.0;
    HierarchyForward hier;
    DecoderForward dec;
};

LossForward model_loss(const SceneQaModel& model, const TrainExample& example);

void model_backward(const SceneQaModel& model, const LossForward& forward,
                    const TrainExample& example, SceneQaModel& grads);

/// Plain gradient descent over the summed example losses. Returns the
/// per-step mean loss; throws with the step index if the loss goes
/// non-finite.
std::vector<double> train_toy(SceneQaModel& model,
                              const std::vector<TrainExample>& examples, int steps,
                              double lr);

// --- patch features without a ViT ------------------------------------------

/// Per-cell stand-in descriptor over a g x g grid: mean RGB (0..1), mean
/// depth (normalized by the view maximum, background as 0), and the cell
/// center in grid coordinates, zero-padded to dim. dim must be >= 6 and the
/// image must divide evenly by the grid.
Eigen::MatrixXd patchify_stub(const RenderedView& view, int grid, int dim);

// --- checkpoints -------------------------------------------------------------

/// Versioned binary checkpoint: header with model shape, then named
/// little-endian float64 tensors. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const SceneQaModel& model);
SceneQaModel load_checkpoint(const std::filesystem::path& path);

}  // namespace s2p
