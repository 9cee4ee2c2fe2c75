#include "drqr/qpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace drqr {

std::string predictor_name(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::AvgIdf: return "AvgIDF";
        case PredictorKind::AvgIctf: return "AvgICTF";
        case PredictorKind::Scs: return "SCS";
        case PredictorKind::AvgScq: return "AvgSCQ";
        case PredictorKind::MaxScq: return "MaxSCQ";
        case PredictorKind::SumScq: return "SumSCQ";
        case PredictorKind::QueryLength: return "QueryLength";
    }
    throw std::logic_error("unreachable predictor kind");
}

PredictorKind parse_predictor(const std::string& name) {
    for (PredictorKind kind : kAllPredictors)
        if (predictor_name(kind) == name) return kind;
    throw std::invalid_argument("unknown predictor: " + name);
}

std::optional<double> term_idf(const CollectionStats& stats, const std::string& term) {
    if (stats.num_docs() == 0) throw std::invalid_argument("idf over empty collection");
    TermStats ts = stats.term(term);
    if (ts.doc_frequency == 0) return std::nullopt;
    return std::log(static_cast<double>(stats.num_docs()) / static_cast<double>(ts.doc_frequency));
}

std::optional<double> term_ictf(const CollectionStats& stats, const std::string& term) {
    if (stats.total_terms() == 0) throw std::invalid_argument("ictf over empty collection");
    TermStats ts = stats.term(term);
    if (ts.collection_frequency == 0) return std::nullopt;
    return std::log(static_cast<double>(stats.total_terms()) /
                    static_cast<double>(ts.collection_frequency));
}

std::optional<double> term_scq(const CollectionStats& stats, const std::string& term) {
    auto idf = term_idf(stats, term);
    if (!idf) return std::nullopt;
    TermStats ts = stats.term(term);
    return (1.0 + std::log(static_cast<double>(ts.collection_frequency))) * *idf;
}

namespace {

QppScore aggregate_term_scores(const CollectionStats& stats, std::span<const std::string> query,
                               PredictorKind kind) {
    double sum = 0.0;
    double max = -std::numeric_limits<double>::infinity();
    std::size_t scored = 0;
    for (const auto& term : query) {
        std::optional<double> s;
        switch (kind) {
            case PredictorKind::AvgIdf: s = term_idf(stats, term); break;
            case PredictorKind::AvgIctf: s = term_ictf(stats, term); break;
            default: s = term_scq(stats, term); break;
        }
        if (!s) continue;
        sum += *s;
        max = std::max(max, *s);
        ++scored;
    }
    QppScore result{kind, 0.0, scored};
    if (scored == 0) return result;
    switch (kind) {
        case PredictorKind::AvgIdf:
        case PredictorKind::AvgIctf:
        case PredictorKind::AvgScq:
            result.value = sum / static_cast<double>(scored);
            break;
        case PredictorKind::MaxScq:
            result.value = max;
            break;
        case PredictorKind::SumScq:
            result.value = sum;
            break;
        default:
            throw std::logic_error("unreachable aggregation kind");
    }
    return result;
}

QppScore simplified_clarity(const CollectionStats& stats, std::span<const std::string> query) {
    if (stats.total_terms() == 0) throw std::invalid_argument("SCS over empty collection");
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& term : query) tf[term] += 1;
    const double qlen = static_cast<double>(query.size());
    double value = 0.0;
    std::size_t scored = 0;
    for (const auto& [term, freq] : tf) {
        TermStats ts = stats.term(term);
        if (ts.collection_frequency == 0) continue;
        double pr_q = static_cast<double>(freq) / qlen;
        double pr_d = static_cast<double>(ts.collection_frequency) /
                      static_cast<double>(stats.total_terms());
        value += pr_q * std::log(pr_q / pr_d);
        ++scored;
    }
    if (scored == 0) return {PredictorKind::Scs, 0.0, 0};
    return {PredictorKind::Scs, value, scored};
}

}  // namespace

QppScore predict(const CollectionStats& stats, std::span<const std::string> query,
                 PredictorKind kind) {
    if (kind == PredictorKind::QueryLength)
        return {kind, static_cast<double>(query.size()), query.size()};
    if (query.empty())
        throw std::invalid_argument("empty query for predictor " + predictor_name(kind));
    if (kind == PredictorKind::Scs) return simplified_clarity(stats, query);
    return aggregate_term_scores(stats, query, kind);
}

double normalize_score(const QppScore& score, const Calibration& calibration) {
    if (!(calibration.min < calibration.max))
        throw std::invalid_argument("degenerate calibration (min >= max)");
    double scaled = (score.value - calibration.min) / (calibration.max - calibration.min);
    return std::clamp(scaled, 0.0, 1.0);
}

Calibration calibrate(const CollectionStats& stats,
                      const std::vector<std::vector<std::string>>& reference_queries,
                      PredictorKind kind) {
    if (reference_queries.empty())
        throw std::invalid_argument("calibration needs a non-empty reference query set");
    Calibration c{std::numeric_limits<double>::infinity(),
                  -std::numeric_limits<double>::infinity()};
    for (const auto& query : reference_queries) {
        if (query.empty() && kind != PredictorKind::QueryLength) continue;
        QppScore s = predict(stats, query, kind);
        c.min = std::min(c.min, s.value);
        c.max = std::max(c.max, s.value);
    }
    if (!(c.min < c.max))
        throw std::invalid_argument("degenerate calibration for " + predictor_name(kind) +
                                    ": min == max");
    return c;
}

}  // namespace drqr
