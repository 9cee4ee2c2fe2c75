#include "drqr/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace drqr {
namespace {

double log2d(double x) { return std::log2(x); }

// Parameter-free DFR hypergeometric model. Contributions whose log arguments
// are non-positive are clamped to 0.
double dph_term_score(double tf, double doc_len, double avgdl, double num_docs,
                      double collection_freq) {
    double f = tf / doc_len;
    if (1.0 - f <= 0.0) return 0.0;
    double norm = (1.0 - f) * (1.0 - f) / (tf + 1.0);
    double arg1 = (tf * avgdl / doc_len) * (num_docs / collection_freq);
    if (arg1 <= 0.0) return 0.0;
    double arg2 = 2.0 * std::numbers::pi * tf * (1.0 - f);
    return norm * (tf * log2d(arg1) + 0.5 * log2d(arg2));
}

// Okapi BM25 with Robertson-Sparck-Jones idf (+0.5 smoothing, clamped at 0).
double bm25_term_score(double tf, double doc_len, double avgdl, double num_docs,
                       double doc_freq, const Bm25Params& p) {
    double idf = std::log((num_docs - doc_freq + 0.5) / (doc_freq + 0.5));
    idf = std::max(idf, 0.0);
    double denom = tf + p.k1 * (1.0 - p.b + p.b * doc_len / avgdl);
    return idf * tf * (p.k1 + 1.0) / denom;
}

}  // namespace

std::string ranking_model_name(RankingModel model) {
    return model == RankingModel::Dph ? "dph" : "bm25";
}

RankingModel parse_ranking_model(const std::string& name) {
    if (name == "dph") return RankingModel::Dph;
    if (name == "bm25") return RankingModel::Bm25;
    throw std::invalid_argument("unknown ranking model: " + name);
}

WeightedQuery WeightedQuery::from_terms(std::string qid, std::span<const std::string> terms,
                                        double weight) {
    WeightedQuery q;
    q.qid = std::move(qid);
    for (const auto& t : terms) q.terms.emplace_back(t, weight);
    return q.canonical();
}

WeightedQuery WeightedQuery::canonical() const {
    std::map<std::string, double> merged;
    for (const auto& [term, weight] : terms) {
        if (!std::isfinite(weight) || weight < 0.0)
            throw std::invalid_argument("query term weight must be finite and non-negative");
        merged[term] += weight;
    }
    WeightedQuery out;
    out.qid = qid;
    for (auto& [term, weight] : merged)
        if (weight > 0.0) out.terms.emplace_back(term, weight);
    return out;
}

double WeightedQuery::weight(const std::string& term) const {
    double w = 0.0;
    for (const auto& [t, tw] : terms)
        if (t == term) w += tw;
    return w;
}

double score_document(RankingModel model, const InvertedIndex& index, const WeightedQuery& query,
                      std::uint32_t doc, const Bm25Params& bm25) {
    const auto& stats = index.stats();
    const double doc_len = index.doc(doc).length;
    const double avgdl = stats.average_doc_length();
    const double n = static_cast<double>(stats.num_docs());
    double score = 0.0;
    for (const auto& [term, weight] : query.terms) {
        std::uint32_t tf = index.term_frequency(term, doc);
        if (tf == 0) continue;
        TermStats ts = stats.term(term);
        double s = model == RankingModel::Dph
                       ? dph_term_score(tf, doc_len, avgdl, n,
                                        static_cast<double>(ts.collection_frequency))
                       : bm25_term_score(tf, doc_len, avgdl, n,
                                         static_cast<double>(ts.doc_frequency), bm25);
        score += weight * s;
    }
    return score;
}

RankedList retrieve(RankingModel model, const InvertedIndex& index, const WeightedQuery& query,
                    std::size_t k, const std::string& tag, const Bm25Params& bm25) {
    if (k < 1) throw std::invalid_argument("retrieve needs k >= 1");
    WeightedQuery q = query.canonical();
    RankedList result{q.qid, {}, tag};
    if (q.terms.empty()) return result;

    // document-at-a-time over the union of the query postings
    std::map<std::uint32_t, double> scores;
    for (const auto& [term, weight] : q.terms) {
        const auto* list = index.postings(term);
        if (!list) continue;
        for (const auto& posting : *list) scores.emplace(posting.doc, 0.0);
    }
    for (auto& [doc, score] : scores) score = score_document(model, index, q, doc, bm25);

    std::vector<std::pair<std::uint32_t, double>> ranked(scores.begin(), scores.end());
    std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return index.doc(a.first).docno < index.doc(b.first).docno;
    });
    if (ranked.size() > k) ranked.resize(k);
    for (const auto& [doc, score] : ranked) result.entries.push_back({index.doc(doc).docno, score});
    return result;
}

WeightedQuery bo1_expand(const InvertedIndex& index, const WeightedQuery& query,
                         const RankedList& initial, std::size_t num_docs, std::size_t num_terms) {
    if (initial.entries.empty()) throw std::invalid_argument("bo1_expand needs a non-empty ranking");
    const auto& stats = index.stats();
    const double n = static_cast<double>(stats.num_docs());

    std::vector<std::uint32_t> feedback_docs;
    for (const auto& entry : initial.entries) {
        if (feedback_docs.size() == num_docs) break;
        auto id = index.doc_id(entry.docno);
        if (!id) throw std::invalid_argument("bo1_expand: unknown docno " + entry.docno);
        feedback_docs.push_back(*id);
    }

    // term frequencies within the feedback set
    std::unordered_map<std::string, double> feedback_tf;
    for (const auto& [term, term_stats] : stats.terms()) {
        double tf_x = 0.0;
        for (std::uint32_t doc : feedback_docs) tf_x += index.term_frequency(term, doc);
        if (tf_x > 0.0) feedback_tf.emplace(term, tf_x);
    }

    // w(t) = tf_x * log2((1 + P_n) / P_n) + log2(1 + P_n), P_n = F_t / N
    std::vector<std::pair<std::string, double>> weighted;
    weighted.reserve(feedback_tf.size());
    for (const auto& [term, tf_x] : feedback_tf) {
        double p_n = static_cast<double>(stats.term(term).collection_frequency) / n;
        double w = tf_x * log2d((1.0 + p_n) / p_n) + log2d(1.0 + p_n);
        weighted.emplace_back(term, w);
    }
    std::sort(weighted.begin(), weighted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (weighted.size() > num_terms) weighted.resize(num_terms);

    WeightedQuery expanded = query.canonical();
    if (weighted.empty()) return expanded;
    double w_max = weighted.front().second;
    for (const auto& [term, w] : weighted)
        expanded.terms.emplace_back(term, w_max > 0.0 ? w / w_max : 0.0);
    return expanded.canonical();
}

WeightedQuery mix_queries(const WeightedQuery& q0, const WeightedQuery& qr, double theta) {
    if (!(theta >= 0.0)) throw std::invalid_argument("theta must be non-negative");
    if (q0.qid != qr.qid) throw std::invalid_argument("mix_queries needs matching qids");
    WeightedQuery mixed;
    mixed.qid = q0.qid;
    for (const auto& [term, weight] : q0.terms) mixed.terms.emplace_back(term, weight);
    for (const auto& [term, weight] : qr.terms) mixed.terms.emplace_back(term, theta * weight);
    return mixed.canonical();
}

void write_trec_run(std::ostream& out, std::span<const RankedList> runs) {
    for (const auto& run : runs) {
        std::size_t rank = 1;
        for (const auto& entry : run.entries) {
            char score[32];
            std::snprintf(score, sizeof(score), "%.6f", entry.score);
            out << run.qid << " Q0 " << entry.docno << ' ' << rank << ' ' << score << ' '
                << run.tag << '\n';
            ++rank;
        }
    }
}

void write_trec_run(const std::filesystem::path& path, std::span<const RankedList> runs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write run file: " + path.string());
    write_trec_run(out, runs);
}

std::vector<RankedList> read_trec_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run file: " + path.string());
    std::vector<RankedList> runs;
    std::unordered_map<std::string, std::size_t> by_qid;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string qid, q0, docno, tag;
        std::size_t rank;
        double score;
        if (!(row >> qid >> q0 >> docno >> rank >> score >> tag))
            throw std::runtime_error("malformed run line " + std::to_string(lineno) + " in " +
                                     path.string());
        auto [it, inserted] = by_qid.emplace(qid, runs.size());
        if (inserted) runs.push_back({qid, {}, tag});
        runs[it->second].entries.push_back({docno, score});
    }
    return runs;
}

}  // namespace drqr
