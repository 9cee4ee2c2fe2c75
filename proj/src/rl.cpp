#include "drqr/rl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "drqr/common.hpp"
#include "drqr/porter.hpp"
#include "drqr/text_pipeline.hpp"

namespace drqr {

std::vector<std::string> dedup_penalize(std::span<const std::string> tokens) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    std::set<std::string> seen;
    for (const auto& token : tokens) {
        if (seen.insert(token).second)
            out.push_back(token);
        else
            out.emplace_back(kPadToken);
    }
    return out;
}

double f1_reward(std::span<const std::string> predicted, std::span<const std::string> truth) {
    if (truth.empty()) throw std::invalid_argument("f1_reward needs a non-empty truth");
    auto penalized = dedup_penalize(predicted);
    std::set<std::string> truth_set(truth.begin(), truth.end());
    std::size_t matches = 0;
    std::size_t non_pad = 0;
    for (const auto& token : penalized) {
        if (token == kPadToken) continue;
        ++non_pad;
        if (truth_set.contains(token)) ++matches;
    }
    if (non_pad == 0) return 0.0;
    double precision = static_cast<double>(matches) / static_cast<double>(non_pad);
    double recall = static_cast<double>(matches) / static_cast<double>(truth_set.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double qpp_reward(std::span<const std::string> predicted, const CollectionStats& stats,
                  const RewardConfig& config) {
    std::vector<std::string> stemmed;
    for (const auto& token : predicted) {
        if (token == kPadToken) continue;
        std::string lowered;
        lowered.reserve(token.size());
        for (char c : token) lowered.push_back(static_cast<char>(std::tolower(
            static_cast<unsigned char>(c))));
        stemmed.push_back(porter_stem(std::move(lowered)));
    }
    if (stemmed.empty()) return 0.0;
    QppScore score = predict(stats, stemmed, config.predictor);
    return normalize_score(score, config.calibration);
}

double combined_reward(std::span<const std::string> predicted,
                       std::span<const std::string> truth, const CollectionStats& stats,
                       const RewardConfig& config) {
    if (!(config.lambda >= 0.0 && config.lambda <= 1.0))
        throw std::invalid_argument("lambda must lie in [0, 1]");
    double f1 = f1_reward(predicted, truth);
    if (config.lambda == 1.0) return f1;  // CatseqRL configuration, bitwise F1
    double qpp = qpp_reward(predicted, stats, config);
    return config.lambda * f1 + (1.0 - config.lambda) * qpp;
}

namespace {

// Tape-integrated sampling so the drawn per-step log-probabilities exist as
// nodes for the surrogate loss.
struct TapedSample {
    std::vector<std::string> tokens;
    std::vector<ad::Tape::Id> log_prob_nodes;
    std::vector<double> log_probs;
};

TapedSample sample_on_tape(ad::Tape& tape, ModelParameters& params, const Vocabulary& vocab,
                           const ExtendedSource& source, int max_len, std::mt19937_64& rng) {
    auto enc = encode_on_tape(tape, params, source.input_ids);
    ad::Tape::Id state = enc.initial_decoder_state;
    int prev_id = Vocabulary::kBos;
    TapedSample result;
    for (int t = 0; t < max_len; ++t) {
        auto step = decode_step_on_tape(tape, params, prev_id, state, enc, source);
        state = step.state;
        const Eigen::VectorXd& p = tape.value(step.combined);
        Eigen::Index drawn = multinomial_draw(p, rng);
        auto log_node = tape.log(tape.pick(step.combined, drawn));
        result.log_prob_nodes.push_back(log_node);
        result.log_probs.push_back(tape.scalar(log_node));
        if (drawn == Vocabulary::kEos) break;
        if (drawn < vocab.size()) {
            result.tokens.push_back(vocab.token(static_cast<int>(drawn)));
            prev_id = static_cast<int>(drawn);
        } else {
            result.tokens.push_back(
                source.oov_tokens.at(static_cast<std::size_t>(drawn - vocab.size())));
            prev_id = Vocabulary::kUnk;
        }
    }
    return result;
}

double mean_greedy_reward(ModelParameters& params, const Vocabulary& vocab,
                          std::span<const QueryPair> pairs, const RewardFunction& reward) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& pair : pairs) {
        auto source = tokenize(pair.src_text);
        auto truth = tokenize(pair.tgt_text);
        if (source.empty() || truth.empty()) continue;
        auto decoded = greedy_decode(params, vocab, source, params.config.max_len);
        total += reward(decoded, truth);
        ++n;
    }
    return n == 0 ? 0.0 : total / static_cast<double>(n);
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

std::vector<RewardRecord> self_critic_update(ModelParameters& params, const Vocabulary& vocab,
                                             std::span<const QueryPair> batch,
                                             const RewardFunction& reward, std::mt19937_64& rng) {
    std::vector<RewardRecord> records;
    const double inv_batch = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
    for (const auto& pair : batch) {
        auto source_tokens = tokenize(pair.src_text);
        auto truth = tokenize(pair.tgt_text);
        if (source_tokens.empty() || truth.empty()) continue;
        auto source = ExtendedSource::make(vocab, source_tokens);

        ad::Tape tape;
        auto sample = sample_on_tape(tape, params, vocab, source, params.config.max_len, rng);
        auto baseline = greedy_decode(params, vocab, source_tokens, params.config.max_len);

        RewardRecord record;
        record.sampled = sample.tokens;
        record.baseline = baseline;
        record.log_probs = sample.log_probs;
        // reward observed only once the sequence is complete
        record.r_sample = reward(record.sampled, truth);
        record.r_baseline = reward(record.baseline, truth);
        record.advantage = record.r_sample - record.r_baseline;
        if (!std::isfinite(record.advantage))
            throw std::runtime_error("self_critic_update: non-finite advantage");

        if (record.advantage != 0.0 && !sample.log_prob_nodes.empty()) {
            auto loss = tape.scaled_sum(sample.log_prob_nodes, -record.advantage * inv_batch);
            if (!std::isfinite(tape.scalar(loss)))
                throw std::runtime_error("self_critic_update: non-finite surrogate loss");
            tape.backward(loss);
        }
        records.push_back(std::move(record));
    }
    return records;
}

RlTrainResult train_drqr(ModelParameters& params, const Vocabulary& vocab,
                         std::span<const QueryPair> train_pairs,
                         std::span<const QueryPair> valid_pairs, const RewardFunction& reward,
                         const TrainingSchedule& schedule, std::uint64_t seed) {
    if (train_pairs.empty() || valid_pairs.empty())
        throw std::invalid_argument("train_drqr needs non-empty train and validation splits");

    std::mt19937_64 rng(seed);
    AdamOptimizer optimizer(schedule.rl_learning_rate);
    auto tensors = params.tensors();

    RlTrainResult result;
    RlEpochStats initial;
    initial.valid_reward = mean_greedy_reward(params, vocab, valid_pairs, reward);
    result.history.push_back(initial);
    result.best_epoch = 0;

    double best_valid = initial.valid_reward;
    std::vector<Eigen::MatrixXd> best_values = snapshot(params);
    std::size_t stale_epochs = 0;

    std::vector<std::size_t> order(train_pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < schedule.n_rl_epochs; ++epoch) {
        deterministic_shuffle(order, rng);
        double sum_sample = 0.0, sum_baseline = 0.0, sum_advantage = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += schedule.rl_batch_size) {
            std::size_t end = std::min(order.size(), start + schedule.rl_batch_size);
            std::vector<QueryPair> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(train_pairs[order[i]]);
            params.zero_grads();
            auto records = self_critic_update(params, vocab, batch, reward, rng);
            params.clip_gradients(schedule.grad_clip);
            optimizer.step(tensors);
            for (const auto& r : records) {
                sum_sample += r.r_sample;
                sum_baseline += r.r_baseline;
                sum_advantage += r.advantage;
                ++seen;
            }
        }
        RlEpochStats stats;
        if (seen > 0) {
            stats.mean_sample_reward = sum_sample / static_cast<double>(seen);
            stats.mean_baseline_reward = sum_baseline / static_cast<double>(seen);
            stats.mean_advantage = sum_advantage / static_cast<double>(seen);
        }
        stats.valid_reward = mean_greedy_reward(params, vocab, valid_pairs, reward);
        result.history.push_back(stats);

        if (stats.valid_reward > best_valid) {
            best_valid = stats.valid_reward;
            best_values = snapshot(params);
            result.best_epoch = result.history.size() - 1;
            stale_epochs = 0;
        } else if (++stale_epochs >= schedule.patience) {
            break;
        }
    }
    restore(params, best_values);
    return result;
}

RlTrainResult train_drqr(ModelParameters& params, const Vocabulary& vocab,
                         std::span<const QueryPair> train_pairs,
                         std::span<const QueryPair> valid_pairs, const CollectionStats& stats,
                         const RewardConfig& config, const TrainingSchedule& schedule,
                         std::uint64_t seed) {
    CombinedReward reward(stats, config);
    return train_drqr(params, vocab, train_pairs, valid_pairs, reward, schedule, seed);
}

void write_rl_history(const std::filesystem::path& path, const RlTrainResult& result) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write reward history: " + path.string());
    out << "epoch\tmean_sample_reward\tmean_baseline_reward\tmean_advantage\n";
    for (std::size_t i = 0; i < result.history.size(); ++i) {
        const auto& row = result.history[i];
        out << i << '\t' << row.mean_sample_reward << '\t' << row.mean_baseline_reward << '\t'
            << row.mean_advantage << '\n';
    }
}

}  // namespace drqr
