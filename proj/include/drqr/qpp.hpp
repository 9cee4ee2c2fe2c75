#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drqr/index.hpp"

namespace drqr {

/// The seven pre-retrieval query performance predictors.
enum class PredictorKind { AvgIdf, AvgIctf, Scs, AvgScq, MaxScq, SumScq, QueryLength };

constexpr PredictorKind kAllPredictors[] = {
    PredictorKind::AvgIdf, PredictorKind::AvgIctf, PredictorKind::Scs,
    PredictorKind::AvgScq, PredictorKind::MaxScq,  PredictorKind::SumScq,
    PredictorKind::QueryLength};

std::string predictor_name(PredictorKind kind);
PredictorKind parse_predictor(const std::string& name);

struct QppScore {
    PredictorKind kind;
    double value = 0.0;
    std::size_t num_scored_terms = 0;
};

/// ln(N / N_t). nullopt for unseen terms (they are skipped, not zero-filled).
std::optional<double> term_idf(const CollectionStats& stats, const std::string& term);

/// ln(|D| / F_t). nullopt for unseen terms.
std::optional<double> term_ictf(const CollectionStats& stats, const std::string& term);

/// (1 + ln F_t) * idf(t). nullopt for unseen terms.
std::optional<double> term_scq(const CollectionStats& stats, const std::string& term);

/// Query-level predictor value. Unseen terms are skipped; all-unseen queries
/// score 0 with num_scored_terms = 0. Throws on empty queries except for
/// QueryLength (empty -> 0).
QppScore predict(const CollectionStats& stats, std::span<const std::string> query,
                 PredictorKind kind);

struct Calibration {
    double min = 0.0;
    double max = 1.0;
};

/// clamp((value - min) / (max - min), 0, 1).
double normalize_score(const QppScore& score, const Calibration& calibration);

/// Per-kind min/max over a reference query set. Throws when degenerate
/// (min == max) or when the reference set is empty.
Calibration calibrate(const CollectionStats& stats,
                      const std::vector<std::vector<std::string>>& reference_queries,
                      PredictorKind kind);

}  // namespace drqr
