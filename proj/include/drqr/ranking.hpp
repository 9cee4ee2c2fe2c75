#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drqr/index.hpp"

namespace drqr {

enum class RankingModel { Dph, Bm25 };

std::string ranking_model_name(RankingModel model);
RankingModel parse_ranking_model(const std::string& name);

/// Bag of (term, weight) pairs. canonical() merges duplicate terms by summing
/// weights and drops zero-weight terms.
struct WeightedQuery {
    std::string qid;
    std::vector<std::pair<std::string, double>> terms;

    static WeightedQuery from_terms(std::string qid, std::span<const std::string> terms,
                                    double weight = 1.0);
    WeightedQuery canonical() const;
    double weight(const std::string& term) const;
};

struct RankedEntry {
    std::string docno;
    double score = 0.0;
};

/// Ordered (docno, score) list; scores non-increasing, rank of the first
/// entry is 1.
struct RankedList {
    std::string qid;
    std::vector<RankedEntry> entries;
    std::string tag;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Weighted sum over query terms occurring in the document. Documents without
/// any query term score 0.
double score_document(RankingModel model, const InvertedIndex& index, const WeightedQuery& query,
                      std::uint32_t doc, const Bm25Params& bm25 = {});

/// Top-k candidates (docs containing at least one query term), ties broken by
/// docno ascending.
RankedList retrieve(RankingModel model, const InvertedIndex& index, const WeightedQuery& query,
                    std::size_t k, const std::string& tag = "run", const Bm25Params& bm25 = {});

/// Bo1 pseudo-relevance expansion over the top num_docs documents of an
/// initial ranking. Selected terms carry their Bo1 weight normalized by the
/// maximum; original terms keep their weight and accumulate the normalized
/// expansion weight when re-selected.
WeightedQuery bo1_expand(const InvertedIndex& index, const WeightedQuery& query,
                         const RankedList& initial, std::size_t num_docs = 3,
                         std::size_t num_terms = 10);

/// q' = q0 (weight 1 each) + theta * qr; shared terms accumulate to 1+theta.
WeightedQuery mix_queries(const WeightedQuery& q0, const WeightedQuery& qr, double theta);

/// Optional re-ranking stage. Only the identity implementation ships.
class Reranker {
  public:
    virtual ~Reranker() = default;
    virtual RankedList rerank(const WeightedQuery& query, RankedList ranking) const = 0;
};

class IdentityReranker final : public Reranker {
  public:
    RankedList rerank(const WeightedQuery&, RankedList ranking) const override { return ranking; }
};

/// TREC run format: `qid Q0 docno rank score tag`, ranks from 1, scores with
/// 6 decimal places.
void write_trec_run(std::ostream& out, std::span<const RankedList> runs);
void write_trec_run(const std::filesystem::path& path, std::span<const RankedList> runs);
std::vector<RankedList> read_trec_run(const std::filesystem::path& path);

}  // namespace drqr
