// Test-only brute-force oracles, kept independent of the library's
// implementation paths: everything here recomputes from raw token scans and
// the formulas directly.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "drqr/common.hpp"
#include "drqr/qpp.hpp"

namespace oracle {

using TokenDocs = std::vector<std::vector<std::string>>;

inline std::size_t doc_frequency(const TokenDocs& docs, const std::string& term) {
    std::size_t n = 0;
    for (const auto& doc : docs)
        for (const auto& t : doc)
            if (t == term) {
                ++n;
                break;
            }
    return n;
}

inline std::size_t collection_frequency(const TokenDocs& docs, const std::string& term) {
    std::size_t n = 0;
    for (const auto& doc : docs)
        for (const auto& t : doc)
            if (t == term) ++n;
    return n;
}

inline std::size_t total_terms(const TokenDocs& docs) {
    std::size_t n = 0;
    for (const auto& doc : docs) n += doc.size();
    return n;
}

// Recomputes any of the seven predictors from raw token scans, with a
// selectable logarithm base.
inline double predictor(const TokenDocs& docs, const std::vector<std::string>& query,
                        drqr::PredictorKind kind, double log_base = std::exp(1.0)) {
    const double inv_log_base = 1.0 / std::log(log_base);
    auto logb = [&](double x) { return std::log(x) * inv_log_base; };
    const double n_docs = static_cast<double>(docs.size());
    const double n_terms = static_cast<double>(total_terms(docs));

    using drqr::PredictorKind;
    if (kind == PredictorKind::QueryLength) return static_cast<double>(query.size());

    if (kind == PredictorKind::Scs) {
        std::map<std::string, std::size_t> tf;
        for (const auto& t : query) tf[t] += 1;
        double value = 0.0;
        std::size_t scored = 0;
        for (const auto& [term, freq] : tf) {
            std::size_t cf = collection_frequency(docs, term);
            if (cf == 0) continue;
            double pr_q = static_cast<double>(freq) / static_cast<double>(query.size());
            double pr_d = static_cast<double>(cf) / n_terms;
            value += pr_q * logb(pr_q / pr_d);
            ++scored;
        }
        return scored == 0 ? 0.0 : value;
    }

    double sum = 0.0;
    double max = -std::numeric_limits<double>::infinity();
    std::size_t scored = 0;
    for (const auto& term : query) {
        std::size_t df = doc_frequency(docs, term);
        std::size_t cf = collection_frequency(docs, term);
        double score;
        switch (kind) {
            case PredictorKind::AvgIdf:
                if (df == 0) continue;
                score = logb(n_docs / static_cast<double>(df));
                break;
            case PredictorKind::AvgIctf:
                if (cf == 0) continue;
                score = logb(n_terms / static_cast<double>(cf));
                break;
            default:  // the SCQ family
                if (df == 0) continue;
                score = (1.0 + logb(static_cast<double>(cf))) * logb(n_docs / static_cast<double>(df));
                break;
        }
        sum += score;
        if (score > max) max = score;
        ++scored;
    }
    if (scored == 0) return 0.0;
    switch (kind) {
        case PredictorKind::AvgIdf:
        case PredictorKind::AvgIctf:
        case PredictorKind::AvgScq:
            return sum / static_cast<double>(scored);
        case PredictorKind::MaxScq:
            return max;
        default:
            return sum;  // SumScq
    }
}

struct RandomCorpus {
    TokenDocs docs;
    std::vector<std::string> vocabulary;
};

inline RandomCorpus random_corpus(std::mt19937_64& rng, std::size_t max_docs = 50,
                                  std::size_t vocab_size = 200, std::size_t max_doc_len = 30) {
    RandomCorpus corpus;
    std::size_t effective_vocab = 2 + drqr::uniform_below(rng, vocab_size - 1);
    for (std::size_t v = 0; v < effective_vocab; ++v)
        corpus.vocabulary.push_back("t" + std::to_string(v));
    std::size_t n_docs = 1 + drqr::uniform_below(rng, max_docs);
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::size_t len = 1 + drqr::uniform_below(rng, max_doc_len);
        std::vector<std::string> doc;
        for (std::size_t i = 0; i < len; ++i)
            doc.push_back(corpus.vocabulary[drqr::uniform_below(rng, corpus.vocabulary.size())]);
        corpus.docs.push_back(std::move(doc));
    }
    return corpus;
}

inline std::vector<std::string> random_query(std::mt19937_64& rng,
                                             const std::vector<std::string>& vocabulary,
                                             std::size_t max_len = 6) {
    std::size_t len = 1 + drqr::uniform_below(rng, max_len);
    std::vector<std::string> query;
    for (std::size_t i = 0; i < len; ++i)
        query.push_back(vocabulary[drqr::uniform_below(rng, vocabulary.size())]);
    return query;
}

}  // namespace oracle
