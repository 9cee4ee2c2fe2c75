#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace drqr {

/// Relevance judgments: (qid, docno) -> grade >= 0, unique per pair.
class Qrels {
  public:
    void add(const std::string& qid, const std::string& docno, int grade);
    int grade(const std::string& qid, const std::string& docno) const;  // 0 when unjudged
    const std::map<std::string, std::map<std::string, int>>& by_qid() const { return by_qid_; }
    /// docno -> qids with grade >= 1
    std::map<std::string, std::vector<std::string>> relevant_by_doc() const;
    std::size_t num_relevant(const std::string& qid) const;

    /// TREC format: `qid 0 docno grade`.
    static Qrels read_trec(const std::filesystem::path& path);
    void write_trec(const std::filesystem::path& path) const;

  private:
    std::map<std::string, std::map<std::string, int>> by_qid_;
};

struct QueryPair {
    std::string src_qid;
    std::string tgt_qid;
    std::string src_text;
    std::string tgt_text;
    bool operator==(const QueryPair&) const = default;
};

struct MiningReport {
    std::vector<std::string> missing_qids;  // relevant but absent from the query table
    std::size_t ordered_pairs = 0;
    std::size_t unordered_pairs = 0;
};

/// All ordered pairs (qi, qj), i != j, of queries sharing a relevant document
/// (grade >= 1); globally de-duplicated, sorted by (src_qid, tgt_qid).
std::vector<QueryPair> mine_pairs(const Qrels& qrels,
                                  const std::map<std::string, std::string>& queries,
                                  MiningReport* report = nullptr);

/// Reproducible disjoint split; train size = round(fraction * total).
std::pair<std::vector<QueryPair>, std::vector<QueryPair>> split_pairs(
    std::vector<QueryPair> pairs, double train_fraction, std::uint64_t seed);

/// Pairs TSV: `src_qid<TAB>tgt_qid<TAB>src_text<TAB>tgt_text`.
void write_pairs_tsv(const std::filesystem::path& path, const std::vector<QueryPair>& pairs);
std::vector<QueryPair> read_pairs_tsv(const std::filesystem::path& path);

/// Queries TSV: `qid<TAB>text`.
std::map<std::string, std::string> read_queries_tsv(const std::filesystem::path& path);

}  // namespace drqr
