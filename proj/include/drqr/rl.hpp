#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drqr/qpp.hpp"
#include "drqr/seq2seq.hpp"

namespace drqr {

inline constexpr std::string_view kPadToken = "<pad>";

struct RewardConfig {
    double lambda = 0.5;  // weight of the F1 term in the combined reward
    PredictorKind predictor = PredictorKind::AvgScq;
    Calibration calibration;
};

/// Keeps the first occurrence of every token; later occurrences become PAD.
/// Length preserved; idempotent.
std::vector<std::string> dedup_penalize(std::span<const std::string> tokens);

/// Set-based F1 over unstemmed tokens after duplicate penalisation; PAD never
/// counts as correct. 0 when precision + recall = 0. Throws on empty truth.
double f1_reward(std::span<const std::string> predicted, std::span<const std::string> truth);

/// Stems the prediction, drops PAD, evaluates the configured predictor and
/// min-max normalizes it. Empty effective query -> 0.
double qpp_reward(std::span<const std::string> predicted, const CollectionStats& stats,
                  const RewardConfig& config);

/// lambda * r_F1 + (1 - lambda) * r_QPP.
double combined_reward(std::span<const std::string> predicted,
                       std::span<const std::string> truth, const CollectionStats& stats,
                       const RewardConfig& config);

/// Reward seam: evaluated exactly once per completed sequence (sample and
/// greedy baseline); tests wrap it to assert call discipline.
class RewardFunction {
  public:
    virtual ~RewardFunction() = default;
    virtual double operator()(std::span<const std::string> predicted,
                              std::span<const std::string> truth) const = 0;
};

class CombinedReward final : public RewardFunction {
  public:
    CombinedReward(const CollectionStats& stats, RewardConfig config)
        : stats_(&stats), config_(std::move(config)) {}
    double operator()(std::span<const std::string> predicted,
                      std::span<const std::string> truth) const override {
        return combined_reward(predicted, truth, *stats_, config_);
    }

  private:
    const CollectionStats* stats_;
    RewardConfig config_;
};

struct RewardRecord {
    std::vector<std::string> sampled;
    std::vector<std::string> baseline;
    double r_sample = 0.0;
    double r_baseline = 0.0;
    double advantage = 0.0;  // r_sample - r_baseline
    std::vector<double> log_probs;
};

/// One self-critic REINFORCE step over a batch: samples a rollout, scores it
/// against the greedy baseline and accumulates gradients of
/// -(r - r_b) * sum_t log p(y_t) / batch into the parameter tensors.
/// Zero-advantage examples contribute exactly zero gradient.
std::vector<RewardRecord> self_critic_update(ModelParameters& params, const Vocabulary& vocab,
                                             std::span<const QueryPair> batch,
                                             const RewardFunction& reward, std::mt19937_64& rng);

struct TrainingSchedule {
    std::size_t n_ml_epochs = 0;  // executed by train_ml before the RL phase
    std::size_t n_rl_epochs = 20;
    double rl_learning_rate = 5e-5;
    std::size_t rl_batch_size = 32;
    std::size_t patience = 3;
    double grad_clip = 1.0;
};

struct RlEpochStats {
    double mean_sample_reward = 0.0;
    double mean_baseline_reward = 0.0;
    double mean_advantage = 0.0;
    double valid_reward = 0.0;  // mean greedy reward on the validation pairs
};

struct RlTrainResult {
    /// history[0] evaluates the pretrained model before any update; rows
    /// 1..n follow the RL epochs.
    std::vector<RlEpochStats> history;
    std::size_t best_epoch = 0;
};

/// Self-critic REINFORCE fine-tuning with Adam; early stop on validation mean
/// reward with the schedule's patience. Restores the best parameters.
RlTrainResult train_drqr(ModelParameters& params, const Vocabulary& vocab,
                         std::span<const QueryPair> train_pairs,
                         std::span<const QueryPair> valid_pairs, const RewardFunction& reward,
                         const TrainingSchedule& schedule, std::uint64_t seed);

RlTrainResult train_drqr(ModelParameters& params, const Vocabulary& vocab,
                         std::span<const QueryPair> train_pairs,
                         std::span<const QueryPair> valid_pairs, const CollectionStats& stats,
                         const RewardConfig& config, const TrainingSchedule& schedule,
                         std::uint64_t seed);

/// Reward history TSV: `epoch<TAB>mean_sample_reward<TAB>mean_baseline_reward<TAB>mean_advantage`.
void write_rl_history(const std::filesystem::path& path, const RlTrainResult& result);

}  // namespace drqr
