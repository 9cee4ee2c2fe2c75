#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "drqr/autodiff.hpp"
#include "drqr/mining.hpp"

namespace drqr {

/// Token table with fixed reserved ids. Ids are assigned deterministically by
/// descending corpus frequency, ties broken lexicographically.
class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kBos = 2;
    static constexpr int kEos = 3;

    static Vocabulary build(std::span<const QueryPair> pairs, std::size_t min_frequency = 1);

    int id(const std::string& token) const;                   // kUnk when absent
    std::optional<int> lookup(const std::string& token) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    Eigen::Index size() const { return static_cast<Eigen::Index>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    static Vocabulary from_tokens(std::vector<std::string> tokens);  // checkpoint load

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

struct ModelConfig {
    Eigen::Index emb_dim = 300;
    Eigen::Index hidden_dim = 300;
    int max_len = 20;
    double dropout = 0.1;
};

struct GruParams {
    ad::Tensor w_z, w_r, w_h;  // input weights, hidden x in
    ad::Tensor u_z, u_r, u_h;  // recurrent weights, hidden x hidden
    ad::Tensor b_z, b_r, b_h;  // biases, hidden x 1

    GruParams() = default;
    GruParams(const std::string& prefix, Eigen::Index hidden, Eigen::Index input);
    void collect(std::vector<ad::Tensor*>& out);
};

/// All trainable tensors of the encoder/decoder/attention/copy network.
struct ModelParameters {
    ModelConfig config;
    Eigen::Index vocab_size = 0;

    ad::Tensor embedding;   // vocab x emb, shared by encoder and decoder
    GruParams enc_fwd;      // hidden x emb
    GruParams enc_bwd;
    GruParams dec;
    ad::Tensor attn_w;      // hidden x 2*hidden, bilinear attention projection
    ad::Tensor copy_ctx_w;    // 2*hidden x 1
    ad::Tensor copy_state_w;  // hidden x 1
    ad::Tensor copy_bias;     // 1 x 1
    ad::Tensor out_w;       // vocab x 3*hidden
    ad::Tensor out_b;       // vocab x 1

    /// Uniform initialization over [-0.1, 0.1].
    static ModelParameters init(const ModelConfig& config, Eigen::Index vocab_size,
                                std::uint64_t seed);

    std::vector<ad::Tensor*> tensors();
    void zero_grads();
    double grad_norm() const;
    void clip_gradients(double max_norm);
};

/// Source sequence with extended-vocabulary bookkeeping: OOV source tokens
/// get temporary ids vocab_size, vocab_size+1, ... so they can be emitted by
/// copying.
struct ExtendedSource {
    std::vector<std::string> tokens;
    std::vector<int> input_ids;              // vocab ids, UNK for OOV
    std::vector<Eigen::Index> ext_ids;       // position -> extended id
    std::vector<std::string> oov_tokens;     // distinct OOV surfaces, first-occurrence order
    Eigen::Index ext_size = 0;               // vocab_size + oov_tokens.size()

    static ExtendedSource make(const Vocabulary& vocab, std::span<const std::string> tokens);
};

struct DropoutState {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;
};

// ---- tape-building forward passes (shared by training and inference) ----

struct EncoderTape {
    std::vector<ad::Tape::Id> states;      // N nodes, each 2*hidden
    ad::Tape::Id initial_decoder_state;    // backward final state, hidden
};

EncoderTape encode_on_tape(ad::Tape& tape, ModelParameters& params, std::span<const int> input_ids,
                           const DropoutState* dropout = nullptr);

struct AttentionTape {
    ad::Tape::Id alpha;    // distribution over N source positions
    ad::Tape::Id context;  // 2*hidden
};

AttentionTape attention_on_tape(ad::Tape& tape, ModelParameters& params, ad::Tape::Id dec_state,
                                const EncoderTape& encoder);

struct StepTape {
    ad::Tape::Id state;     // new decoder state, hidden
    ad::Tape::Id alpha;     // attention distribution
    ad::Tape::Id gate;      // copy probability q_t, 1-dim
    ad::Tape::Id gen;       // p_g over the vocabulary
    ad::Tape::Id copy;      // p_p scattered over the extended vocabulary
    ad::Tape::Id combined;  // q_t * p_p + (1 - q_t) * p_g over the extended vocabulary
};

StepTape decode_step_on_tape(ad::Tape& tape, ModelParameters& params, int prev_token_id,
                             ad::Tape::Id prev_state, const EncoderTape& encoder,
                             const ExtendedSource& source, const DropoutState* dropout = nullptr);

// ---- value-level wrappers over single forward passes ----

/// N x 2*hidden matrix of concatenated forward/backward states. Throws on an
/// empty source.
Eigen::MatrixXd encode(ModelParameters& params, std::span<const int> input_ids);

struct AttentionResult {
    Eigen::VectorXd alpha;
    Eigen::VectorXd context;
};

AttentionResult attention_context(ModelParameters& params, const Eigen::VectorXd& dec_state,
                                  const Eigen::MatrixXd& encoder_states);

struct CopyMixture {
    double gate = 0.0;          // q_t
    Eigen::VectorXd alpha;      // attention over source positions
    Eigen::VectorXd gen;        // p_g over the vocabulary
    Eigen::VectorXd copy;       // p_p over the extended vocabulary
    Eigen::VectorXd combined;   // p over the extended vocabulary
    Eigen::VectorXd new_state;  // decoder state after the step
};

CopyMixture decode_step(ModelParameters& params, int prev_token_id,
                        const Eigen::VectorXd& prev_state, const Eigen::MatrixXd& encoder_states,
                        const ExtendedSource& source);

/// Maps target surface tokens onto the extended vocabulary (vocab id, else
/// copyable source OOV id, else UNK).
std::vector<Eigen::Index> target_extended_ids(const Vocabulary& vocab,
                                              const ExtendedSource& source,
                                              std::span<const std::string> target_tokens);

/// Teacher-forced negative log-likelihood, averaged over non-PAD target
/// positions. Target ids must be non-empty and end with EOS. Gradients
/// accumulate into the parameter tensors when requested.
double sequence_nll(ModelParameters& params, const ExtendedSource& source,
                    std::span<const Eigen::Index> target_ext_ids, bool accumulate_gradients,
                    const DropoutState* dropout = nullptr);

/// Argmax decoding (ties -> lowest id), stops at EOS or max_len. When the
/// argmax is UNK the source token under the attention argmax is emitted
/// instead.
std::vector<std::string> greedy_decode(ModelParameters& params, const Vocabulary& vocab,
                                       std::span<const std::string> source_tokens, int max_len);

struct SampleResult {
    std::vector<std::string> tokens;       // surface tokens, terminal EOS excluded
    std::vector<double> log_probs;         // one per drawn action, incl. terminal EOS
    std::vector<Eigen::Index> ext_ids;     // drawn ids, incl. terminal EOS
    bool ended_with_eos = false;
};

/// Multinomial sampling from the copy mixture at temperature 1.
SampleResult sample_decode(ModelParameters& params, const Vocabulary& vocab,
                           std::span<const std::string> source_tokens, int max_len,
                           std::mt19937_64& rng);

/// Inverse-CDF draw from a probability vector.
Eigen::Index multinomial_draw(const Eigen::VectorXd& p, std::mt19937_64& rng);

class AdamOptimizer {
  public:
    explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                           double epsilon = 1e-8);
    void step(std::span<ad::Tensor* const> tensors);

  private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> m_, v_;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 12;
    std::size_t max_epochs = 50;
    std::size_t patience = 3;
    double grad_clip = 1.0;
    double dropout = 0.1;
    std::uint64_t seed = 1;
};

struct EpochLoss {
    double train = 0.0;
    double valid = 0.0;
};

struct MlTrainResult {
    std::vector<EpochLoss> history;
    std::size_t best_epoch = 0;  // index into history
};

/// Adam on the teacher-forced loss with global-norm clipping, dropout during
/// training only, early stop on validation loss. Restores the best-validation
/// parameters before returning.
MlTrainResult train_ml(ModelParameters& params, const Vocabulary& vocab,
                       std::span<const QueryPair> train_pairs,
                       std::span<const QueryPair> valid_pairs, const TrainConfig& config);

/// Versioned checkpoint holding config, vocabulary and all tensors.
void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const Vocabulary& vocab);
std::pair<ModelParameters, Vocabulary> load_checkpoint(const std::filesystem::path& path);

/// Training history TSV: `epoch<TAB>train_loss<TAB>valid_loss`.
void write_ml_history(const std::filesystem::path& path, const MlTrainResult& result);

}  // namespace drqr
