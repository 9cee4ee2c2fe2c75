#include "drqr/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "drqr/common.hpp"
#include "drqr/text_pipeline.hpp"

namespace drqr {

// ---------------------------------------------------------------- vocabulary

Vocabulary Vocabulary::build(std::span<const QueryPair> pairs, std::size_t min_frequency) {
    if (pairs.empty()) throw std::invalid_argument("vocabulary needs a non-empty pair list");
    std::map<std::string, std::size_t> freq;
    for (const auto& pair : pairs) {
        for (auto& t : tokenize(pair.src_text)) freq[t] += 1;
        for (auto& t : tokenize(pair.tgt_text)) freq[t] += 1;
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [token, count] : freq)
        if (count >= min_frequency) kept.emplace_back(token, count);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> tokens = {"<pad>", "<unk>", "<bos>", "<eos>"};
    tokens.reserve(tokens.size() + kept.size());
    for (auto& [token, count] : kept) tokens.push_back(std::move(token));
    return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    Vocabulary vocab;
    vocab.tokens_ = std::move(tokens);
    for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
        if (!vocab.ids_.emplace(vocab.tokens_[i], static_cast<int>(i)).second)
            throw std::invalid_argument("duplicate vocabulary token: " + vocab.tokens_[i]);
    }
    return vocab;
}

int Vocabulary::id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

std::optional<int> Vocabulary::lookup(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------- parameters

GruParams::GruParams(const std::string& prefix, Eigen::Index hidden, Eigen::Index input)
    : w_z(prefix + ".w_z", hidden, input),
      w_r(prefix + ".w_r", hidden, input),
      w_h(prefix + ".w_h", hidden, input),
      u_z(prefix + ".u_z", hidden, hidden),
      u_r(prefix + ".u_r", hidden, hidden),
      u_h(prefix + ".u_h", hidden, hidden),
      b_z(prefix + ".b_z", hidden, 1),
      b_r(prefix + ".b_r", hidden, 1),
      b_h(prefix + ".b_h", hidden, 1) {}

void GruParams::collect(std::vector<ad::Tensor*>& out) {
    for (ad::Tensor* t : {&w_z, &w_r, &w_h, &u_z, &u_r, &u_h, &b_z, &b_r, &b_h}) out.push_back(t);
}

ModelParameters ModelParameters::init(const ModelConfig& config, Eigen::Index vocab_size,
                                      std::uint64_t seed) {
    const Eigen::Index h = config.hidden_dim;
    const Eigen::Index e = config.emb_dim;
    ModelParameters p;
    p.config = config;
    p.vocab_size = vocab_size;
    p.embedding = ad::Tensor("embedding", vocab_size, e);
    p.enc_fwd = GruParams("enc_fwd", h, e);
    p.enc_bwd = GruParams("enc_bwd", h, e);
    p.dec = GruParams("dec", h, e);
    p.attn_w = ad::Tensor("attn_w", h, 2 * h);
    p.copy_ctx_w = ad::Tensor("copy_ctx_w", 2 * h, 1);
    p.copy_state_w = ad::Tensor("copy_state_w", h, 1);
    p.copy_bias = ad::Tensor("copy_bias", 1, 1);
    p.out_w = ad::Tensor("out_w", vocab_size, 3 * h);
    p.out_b = ad::Tensor("out_b", vocab_size, 1);

    std::mt19937_64 rng(seed);
    for (ad::Tensor* t : p.tensors())
        for (Eigen::Index c = 0; c < t->value.cols(); ++c)
            for (Eigen::Index r = 0; r < t->value.rows(); ++r)
                t->value(r, c) = uniform_range(rng, -0.1, 0.1);
    return p;
}

std::vector<ad::Tensor*> ModelParameters::tensors() {
    std::vector<ad::Tensor*> out;
    out.push_back(&embedding);
    enc_fwd.collect(out);
    enc_bwd.collect(out);
    dec.collect(out);
    for (ad::Tensor* t : {&attn_w, &copy_ctx_w, &copy_state_w, &copy_bias, &out_w, &out_b})
        out.push_back(t);
    return out;
}

void ModelParameters::zero_grads() {
    for (ad::Tensor* t : tensors()) t->zero_grad();
}

double ModelParameters::grad_norm() const {
    double total = 0.0;
    for (ad::Tensor* t : const_cast<ModelParameters*>(this)->tensors())
        total += t->grad.squaredNorm();
    return std::sqrt(total);
}

void ModelParameters::clip_gradients(double max_norm) {
    double norm = grad_norm();
    if (norm > max_norm && norm > 0.0) {
        double scale = max_norm / norm;
        for (ad::Tensor* t : tensors()) t->grad *= scale;
    }
}

// ----------------------------------------------------------- source encoding

ExtendedSource ExtendedSource::make(const Vocabulary& vocab, std::span<const std::string> tokens) {
    ExtendedSource src;
    src.tokens.assign(tokens.begin(), tokens.end());
    for (const auto& token : tokens) {
        auto id = vocab.lookup(token);
        src.input_ids.push_back(id.value_or(Vocabulary::kUnk));
        if (id) {
            src.ext_ids.push_back(*id);
        } else {
            auto it = std::find(src.oov_tokens.begin(), src.oov_tokens.end(), token);
            std::size_t oov_index;
            if (it == src.oov_tokens.end()) {
                oov_index = src.oov_tokens.size();
                src.oov_tokens.push_back(token);
            } else {
                oov_index = static_cast<std::size_t>(it - src.oov_tokens.begin());
            }
            src.ext_ids.push_back(vocab.size() + static_cast<Eigen::Index>(oov_index));
        }
    }
    src.ext_size = vocab.size() + static_cast<Eigen::Index>(src.oov_tokens.size());
    return src;
}

namespace {

Eigen::VectorXd dropout_mask(Eigen::Index n, const DropoutState* dropout) {
    if (!dropout || dropout->rate <= 0.0 || !dropout->rng)
        return Eigen::VectorXd::Ones(n);
    Eigen::VectorXd mask(n);
    double keep_scale = 1.0 / (1.0 - dropout->rate);
    for (Eigen::Index i = 0; i < n; ++i)
        mask(i) = uniform_unit(*dropout->rng) < dropout->rate ? 0.0 : keep_scale;
    return mask;
}

// z and r gate, candidate state via the reset gate, update keeps the old
// state with weight z.
ad::Tape::Id gru_step(ad::Tape& tape, GruParams& gru, ad::Tape::Id x, ad::Tape::Id h_prev) {
    auto z = tape.sigmoid(tape.add(tape.add(tape.matvec(gru.w_z, x), tape.matvec(gru.u_z, h_prev)),
                                   tape.param_vector(gru.b_z)));
    auto r = tape.sigmoid(tape.add(tape.add(tape.matvec(gru.w_r, x), tape.matvec(gru.u_r, h_prev)),
                                   tape.param_vector(gru.b_r)));
    auto candidate = tape.tanh(
        tape.add(tape.add(tape.matvec(gru.w_h, x), tape.matvec(gru.u_h, tape.hadamard(r, h_prev))),
                 tape.param_vector(gru.b_h)));
    return tape.add(tape.hadamard(z, h_prev), tape.hadamard(tape.one_minus(z), candidate));
}

}  // namespace

EncoderTape encode_on_tape(ad::Tape& tape, ModelParameters& params, std::span<const int> input_ids,
                           const DropoutState* dropout) {
    if (input_ids.empty()) throw std::invalid_argument("encode needs a non-empty source");
    const Eigen::Index h = params.config.hidden_dim;
    const std::size_t n = input_ids.size();

    std::vector<ad::Tape::Id> inputs;
    inputs.reserve(n);
    for (int id : input_ids) {
        auto x = tape.embed(params.embedding, id);
        if (dropout) x = tape.mask(x, dropout_mask(params.config.emb_dim, dropout));
        inputs.push_back(x);
    }

    std::vector<ad::Tape::Id> fwd(n), bwd(n);
    ad::Tape::Id state = tape.zeros(h);
    for (std::size_t i = 0; i < n; ++i) {
        state = gru_step(tape, params.enc_fwd, inputs[i], state);
        fwd[i] = state;
    }
    state = tape.zeros(h);
    for (std::size_t i = n; i-- > 0;) {
        state = gru_step(tape, params.enc_bwd, inputs[i], state);
        bwd[i] = state;
    }

    EncoderTape enc;
    enc.states.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto concat = tape.concat(fwd[i], bwd[i]);
        if (dropout) concat = tape.mask(concat, dropout_mask(2 * h, dropout));
        enc.states.push_back(concat);
    }
    enc.initial_decoder_state = bwd[0];
    return enc;
}

AttentionTape attention_on_tape(ad::Tape& tape, ModelParameters& params, ad::Tape::Id dec_state,
                                const EncoderTape& encoder) {
    std::vector<ad::Tape::Id> scores;
    scores.reserve(encoder.states.size());
    for (ad::Tape::Id h : encoder.states)
        scores.push_back(tape.dot(dec_state, tape.matvec(params.attn_w, h)));
    AttentionTape attn;
    attn.alpha = tape.softmax(tape.stack_scalars(scores));
    attn.context = tape.weighted_sum(attn.alpha, encoder.states);
    return attn;
}

StepTape decode_step_on_tape(ad::Tape& tape, ModelParameters& params, int prev_token_id,
                             ad::Tape::Id prev_state, const EncoderTape& encoder,
                             const ExtendedSource& source, const DropoutState* dropout) {
    auto x = tape.embed(params.embedding, prev_token_id);
    if (dropout) x = tape.mask(x, dropout_mask(params.config.emb_dim, dropout));

    StepTape step;
    step.state = gru_step(tape, params.dec, x, prev_state);
    auto exposed = dropout ? tape.mask(step.state, dropout_mask(params.config.hidden_dim, dropout))
                           : step.state;

    auto attn = attention_on_tape(tape, params, exposed, encoder);
    step.alpha = attn.alpha;

    auto gate_pre = tape.add(tape.add(tape.dot(tape.param_vector(params.copy_ctx_w), attn.context),
                                      tape.dot(tape.param_vector(params.copy_state_w), exposed)),
                             tape.param_vector(params.copy_bias));
    step.gate = tape.sigmoid(gate_pre);

    auto logits = tape.add(tape.matvec(params.out_w, tape.concat(exposed, attn.context)),
                           tape.param_vector(params.out_b));
    step.gen = tape.softmax(logits);

    step.copy = tape.scatter_add(attn.alpha, source.ext_ids, source.ext_size);
    step.combined = tape.gate_mix(step.gate, step.copy, tape.zero_pad(step.gen, source.ext_size));
    return step;
}

// ------------------------------------------------------------ value wrappers

Eigen::MatrixXd encode(ModelParameters& params, std::span<const int> input_ids) {
    ad::Tape tape;
    auto enc = encode_on_tape(tape, params, input_ids);
    Eigen::MatrixXd states(static_cast<Eigen::Index>(enc.states.size()),
                           2 * params.config.hidden_dim);
    for (std::size_t i = 0; i < enc.states.size(); ++i)
        states.row(static_cast<Eigen::Index>(i)) = tape.value(enc.states[i]).transpose();
    return states;
}

AttentionResult attention_context(ModelParameters& params, const Eigen::VectorXd& dec_state,
                                  const Eigen::MatrixXd& encoder_states) {
    ad::Tape tape;
    EncoderTape enc;
    for (Eigen::Index i = 0; i < encoder_states.rows(); ++i)
        enc.states.push_back(tape.constant(encoder_states.row(i).transpose()));
    enc.initial_decoder_state = enc.states.empty() ? tape.zeros(params.config.hidden_dim)
                                                   : enc.states.front();
    auto attn = attention_on_tape(tape, params, tape.constant(dec_state), enc);
    return {tape.value(attn.alpha), tape.value(attn.context)};
}

CopyMixture decode_step(ModelParameters& params, int prev_token_id,
                        const Eigen::VectorXd& prev_state, const Eigen::MatrixXd& encoder_states,
                        const ExtendedSource& source) {
    ad::Tape tape;
    EncoderTape enc;
    for (Eigen::Index i = 0; i < encoder_states.rows(); ++i)
        enc.states.push_back(tape.constant(encoder_states.row(i).transpose()));
    enc.initial_decoder_state = tape.zeros(params.config.hidden_dim);
    auto step =
        decode_step_on_tape(tape, params, prev_token_id, tape.constant(prev_state), enc, source);
    CopyMixture out;
    out.gate = tape.scalar(step.gate);
    out.alpha = tape.value(step.alpha);
    out.gen = tape.value(step.gen);
    out.copy = tape.value(step.copy);
    out.combined = tape.value(step.combined);
    out.new_state = tape.value(step.state);
    return out;
}

std::vector<Eigen::Index> target_extended_ids(const Vocabulary& vocab,
                                              const ExtendedSource& source,
                                              std::span<const std::string> target_tokens) {
    std::vector<Eigen::Index> ids;
    ids.reserve(target_tokens.size());
    for (const auto& token : target_tokens) {
        if (auto id = vocab.lookup(token)) {
            ids.push_back(*id);
            continue;
        }
        auto it = std::find(source.oov_tokens.begin(), source.oov_tokens.end(), token);
        if (it != source.oov_tokens.end())
            ids.push_back(vocab.size() + (it - source.oov_tokens.begin()));
        else
            ids.push_back(Vocabulary::kUnk);
    }
    return ids;
}

double sequence_nll(ModelParameters& params, const ExtendedSource& source,
                    std::span<const Eigen::Index> target_ext_ids, bool accumulate_gradients,
                    const DropoutState* dropout) {
    if (target_ext_ids.empty()) throw std::invalid_argument("sequence_nll needs a non-empty target");
    if (target_ext_ids.back() != Vocabulary::kEos)
        throw std::invalid_argument("sequence_nll target must end with EOS");

    ad::Tape tape;
    auto enc = encode_on_tape(tape, params, source.input_ids, dropout);
    ad::Tape::Id state = enc.initial_decoder_state;
    int prev_id = Vocabulary::kBos;
    std::vector<ad::Tape::Id> log_terms;
    for (std::size_t t = 0; t < target_ext_ids.size(); ++t) {
        auto step = decode_step_on_tape(tape, params, prev_id, state, enc, source, dropout);
        state = step.state;
        Eigen::Index y = target_ext_ids[t];
        if (y != Vocabulary::kPad)  // PAD positions masked out
            log_terms.push_back(tape.log(tape.pick(step.combined, y)));
        prev_id = y < params.vocab_size ? static_cast<int>(y) : Vocabulary::kUnk;
    }
    if (log_terms.empty()) return 0.0;
    auto loss = tape.scaled_sum(log_terms, -1.0 / static_cast<double>(log_terms.size()));
    double value = tape.scalar(loss);
    if (!std::isfinite(value))
        throw std::runtime_error("sequence_nll produced a non-finite loss");
    if (accumulate_gradients) tape.backward(loss);
    return value;
}

namespace {

struct DecodedToken {
    Eigen::Index ext_id;
    std::string surface;
    int feed_id;
};

DecodedToken resolve_token(const Vocabulary& vocab, const ExtendedSource& source,
                           Eigen::Index ext_id) {
    DecodedToken out;
    out.ext_id = ext_id;
    if (ext_id < vocab.size()) {
        out.surface = vocab.token(static_cast<int>(ext_id));
        out.feed_id = static_cast<int>(ext_id);
    } else {
        out.surface = source.oov_tokens.at(static_cast<std::size_t>(ext_id - vocab.size()));
        out.feed_id = Vocabulary::kUnk;
    }
    return out;
}

}  // namespace

std::vector<std::string> greedy_decode(ModelParameters& params, const Vocabulary& vocab,
                                       std::span<const std::string> source_tokens, int max_len) {
    if (max_len < 1) throw std::invalid_argument("greedy_decode needs max_len >= 1");
    auto source = ExtendedSource::make(vocab, source_tokens);
    ad::Tape tape;
    auto enc = encode_on_tape(tape, params, source.input_ids);
    ad::Tape::Id state = enc.initial_decoder_state;
    int prev_id = Vocabulary::kBos;
    std::vector<std::string> output;
    for (int t = 0; t < max_len; ++t) {
        auto step = decode_step_on_tape(tape, params, prev_id, state, enc, source);
        state = step.state;
        const Eigen::VectorXd& p = tape.value(step.combined);
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < p.size(); ++i)
            if (p(i) > p(best)) best = i;  // ties keep the lowest id
        if (best == Vocabulary::kEos) break;
        if (best == Vocabulary::kUnk && !source.tokens.empty()) {
            // copy fallback: emit the source token under the attention argmax
            const Eigen::VectorXd& alpha = tape.value(step.alpha);
            Eigen::Index pos = 0;
            for (Eigen::Index i = 1; i < alpha.size(); ++i)
                if (alpha(i) > alpha(pos)) pos = i;
            const std::string& surface = source.tokens[static_cast<std::size_t>(pos)];
            output.push_back(surface);
            prev_id = vocab.id(surface);
            continue;
        }
        auto token = resolve_token(vocab, source, best);
        output.push_back(token.surface);
        prev_id = token.feed_id;
    }
    return output;
}

Eigen::Index multinomial_draw(const Eigen::VectorXd& p, std::mt19937_64& rng) {
    double u = uniform_unit(rng);
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        cumulative += p(i);
        if (u < cumulative) return i;
    }
    return p.size() - 1;  // guard against rounding in the cumulative sum
}

SampleResult sample_decode(ModelParameters& params, const Vocabulary& vocab,
                           std::span<const std::string> source_tokens, int max_len,
                           std::mt19937_64& rng) {
    if (max_len < 1) throw std::invalid_argument("sample_decode needs max_len >= 1");
    auto source = ExtendedSource::make(vocab, source_tokens);
    ad::Tape tape;
    auto enc = encode_on_tape(tape, params, source.input_ids);
    ad::Tape::Id state = enc.initial_decoder_state;
    int prev_id = Vocabulary::kBos;
    SampleResult result;
    for (int t = 0; t < max_len; ++t) {
        auto step = decode_step_on_tape(tape, params, prev_id, state, enc, source);
        state = step.state;
        const Eigen::VectorXd& p = tape.value(step.combined);
        Eigen::Index drawn = multinomial_draw(p, rng);
        result.ext_ids.push_back(drawn);
        result.log_probs.push_back(std::log(p(drawn)));
        if (drawn == Vocabulary::kEos) {
            result.ended_with_eos = true;
            break;
        }
        auto token = resolve_token(vocab, source, drawn);
        result.tokens.push_back(token.surface);
        prev_id = token.feed_id;
    }
    return result;
}

// ------------------------------------------------------------------ training

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void AdamOptimizer::step(std::span<ad::Tensor* const> tensors) {
    if (m_.empty()) {
        for (const ad::Tensor* t : tensors) {
            m_.emplace_back(Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()));
            v_.emplace_back(Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()));
        }
    }
    if (m_.size() != tensors.size())
        throw std::invalid_argument("optimizer bound to a different tensor set");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        ad::Tensor& tensor = *tensors[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * tensor.grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * tensor.grad.cwiseProduct(tensor.grad);
        Eigen::MatrixXd m_hat = m_[i] / bc1;
        Eigen::MatrixXd v_hat = v_[i] / bc2;
        tensor.value.array() -= lr_ * m_hat.array() / (v_hat.array().sqrt() + eps_);
    }
}

namespace {

struct TokenizedPair {
    std::vector<std::string> source;
    std::vector<std::string> target;
};

std::vector<TokenizedPair> tokenize_pairs(std::span<const QueryPair> pairs) {
    std::vector<TokenizedPair> out;
    out.reserve(pairs.size());
    for (const auto& pair : pairs) {
        TokenizedPair tp{tokenize(pair.src_text), tokenize(pair.tgt_text)};
        if (tp.source.empty() || tp.target.empty()) continue;
        out.push_back(std::move(tp));
    }
    return out;
}

double pair_nll(ModelParameters& params, const Vocabulary& vocab, const TokenizedPair& pair,
                bool accumulate, const DropoutState* dropout) {
    auto source = ExtendedSource::make(vocab, pair.source);
    auto target = target_extended_ids(vocab, source, pair.target);
    target.push_back(Vocabulary::kEos);
    return sequence_nll(params, source, target, accumulate, dropout);
}

std::vector<Eigen::MatrixXd> snapshot(ModelParameters& params) {
    std::vector<Eigen::MatrixXd> values;
    for (ad::Tensor* t : params.tensors()) values.push_back(t->value);
    return values;
}

void restore(ModelParameters& params, const std::vector<Eigen::MatrixXd>& values) {
    auto tensors = params.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i]->value = values[i];
}

}  // namespace

MlTrainResult train_ml(ModelParameters& params, const Vocabulary& vocab,
                       std::span<const QueryPair> train_pairs,
                       std::span<const QueryPair> valid_pairs, const TrainConfig& config) {
    auto train = tokenize_pairs(train_pairs);
    auto valid = tokenize_pairs(valid_pairs);
    if (train.empty() || valid.empty())
        throw std::invalid_argument("train_ml needs non-empty train and validation splits");

    std::mt19937_64 rng(config.seed);
    AdamOptimizer optimizer(config.learning_rate);
    auto tensors = params.tensors();

    MlTrainResult result;
    double best_valid = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> best_values = snapshot(params);
    std::size_t stale_epochs = 0;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        deterministic_shuffle(order, rng);
        DropoutState dropout{config.dropout, &rng};
        double train_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(order.size(), start + config.batch_size);
            params.zero_grads();
            for (std::size_t i = start; i < end; ++i) {
                double loss = pair_nll(params, vocab, train[order[i]], true,
                                       config.dropout > 0.0 ? &dropout : nullptr);
                if (!std::isfinite(loss))
                    throw std::runtime_error("NaN training loss at epoch " + std::to_string(epoch));
                train_loss += loss;
                ++seen;
            }
            double inv = 1.0 / static_cast<double>(end - start);
            for (ad::Tensor* t : tensors) t->grad *= inv;
            params.clip_gradients(config.grad_clip);
            optimizer.step(tensors);
        }
        train_loss /= static_cast<double>(seen);

        double valid_loss = 0.0;
        for (const auto& pair : valid) valid_loss += pair_nll(params, vocab, pair, false, nullptr);
        valid_loss /= static_cast<double>(valid.size());
        if (!std::isfinite(valid_loss))
            throw std::runtime_error("NaN validation loss at epoch " + std::to_string(epoch));

        result.history.push_back({train_loss, valid_loss});
        if (valid_loss < best_valid) {
            best_valid = valid_loss;
            best_values = snapshot(params);
            result.best_epoch = result.history.size() - 1;
            stale_epochs = 0;
        } else if (++stale_epochs >= config.patience) {
            break;
        }
    }
    restore(params, best_values);
    return result;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'R', 'Q', 'R', 'C', 'K', 'P', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw std::runtime_error("checkpoint truncated");
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw std::runtime_error("checkpoint truncated");
    return v;
}
double read_f64(std::istream& in) {
    double v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw std::runtime_error("checkpoint truncated");
    return v;
}
std::string read_string(std::istream& in) {
    std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw std::runtime_error("checkpoint truncated");
    return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParameters& params,
                     const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    write_u32(out, kCheckpointVersion);
    write_u64(out, static_cast<std::uint64_t>(params.config.emb_dim));
    write_u64(out, static_cast<std::uint64_t>(params.config.hidden_dim));
    write_u32(out, static_cast<std::uint32_t>(params.config.max_len));
    write_f64(out, params.config.dropout);
    write_u64(out, vocab.tokens().size());
    for (const auto& token : vocab.tokens()) write_string(out, token);
    auto tensors = const_cast<ModelParameters&>(params).tensors();
    write_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const ad::Tensor* t : tensors) {
        write_string(out, t->name);
        write_u64(out, static_cast<std::uint64_t>(t->value.rows()));
        write_u64(out, static_cast<std::uint64_t>(t->value.cols()));
        out.write(reinterpret_cast<const char*>(t->value.data()),
                  static_cast<std::streamsize>(sizeof(double)) * t->value.size());
    }
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

std::pair<ModelParameters, Vocabulary> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[8] = {};
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path.string());
    std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    ModelConfig config;
    config.emb_dim = static_cast<Eigen::Index>(read_u64(in));
    config.hidden_dim = static_cast<Eigen::Index>(read_u64(in));
    config.max_len = static_cast<int>(read_u32(in));
    config.dropout = read_f64(in);

    std::uint64_t vocab_size = read_u64(in);
    std::vector<std::string> tokens;
    tokens.reserve(vocab_size);
    for (std::uint64_t i = 0; i < vocab_size; ++i) tokens.push_back(read_string(in));
    Vocabulary vocab = Vocabulary::from_tokens(std::move(tokens));

    ModelParameters params = ModelParameters::init(config, vocab.size(), 0);
    auto tensors = params.tensors();
    std::uint32_t count = read_u32(in);
    if (count != tensors.size())
        throw std::runtime_error("checkpoint tensor count mismatch in " + path.string());
    for (ad::Tensor* t : tensors) {
        std::string name = read_string(in);
        auto rows = static_cast<Eigen::Index>(read_u64(in));
        auto cols = static_cast<Eigen::Index>(read_u64(in));
        if (name != t->name || rows != t->value.rows() || cols != t->value.cols())
            throw std::runtime_error("checkpoint shape mismatch for tensor " + name);
        if (!in.read(reinterpret_cast<char*>(t->value.data()),
                     static_cast<std::streamsize>(sizeof(double)) * t->value.size()))
            throw std::runtime_error("checkpoint truncated");
    }
    return {std::move(params), std::move(vocab)};
}

void write_ml_history(const std::filesystem::path& path, const MlTrainResult& result) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write history: " + path.string());
    out << "epoch\ttrain_loss\tvalid_loss\n";
    for (std::size_t i = 0; i < result.history.size(); ++i)
        out << i << '\t' << result.history[i].train << '\t' << result.history[i].valid << '\n';
}

}  // namespace drqr
