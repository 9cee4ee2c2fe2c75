#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "drqr/text_pipeline.hpp"

namespace drqr {

struct TermStats {
    std::uint64_t doc_frequency = 0;        // N_t
    std::uint64_t collection_frequency = 0;  // F_t = tf(t, D)
};

/// Corpus-level counts: N, |D| and per-term N_t / F_t. Immutable after build.
class CollectionStats {
  public:
    std::uint64_t num_docs() const { return num_docs_; }
    std::uint64_t total_terms() const { return total_terms_; }
    double average_doc_length() const {
        return num_docs_ == 0 ? 0.0 : static_cast<double>(total_terms_) / static_cast<double>(num_docs_);
    }
    /// (0, 0) for unseen terms.
    TermStats term(const std::string& term) const {
        auto it = terms_.find(term);
        return it == terms_.end() ? TermStats{} : it->second;
    }
    const std::unordered_map<std::string, TermStats>& terms() const { return terms_; }

  private:
    friend class InvertedIndex;
    std::uint64_t num_docs_ = 0;
    std::uint64_t total_terms_ = 0;
    std::unordered_map<std::string, TermStats> terms_;
};

struct Posting {
    std::uint32_t doc = 0;  // internal id, ingestion order
    std::uint32_t tf = 0;
    bool operator==(const Posting&) const = default;
};

struct DocInfo {
    std::string docno;
    std::uint32_t length = 0;
};

class InvertedIndex {
  public:
    /// Builds from (docno, raw text) pairs. Throws on duplicate docno.
    static InvertedIndex build(const std::vector<std::pair<std::string, std::string>>& docs,
                               const PipelineConfig& config);

    const CollectionStats& stats() const { return stats_; }

    /// The text pipeline the corpus was processed with; persisted so queries
    /// can be processed identically at retrieval time.
    const PipelineConfig& pipeline() const { return pipeline_; }

    /// (N_t, F_t); (0, 0) for unseen terms.
    std::pair<std::uint64_t, std::uint64_t> term_statistics(const std::string& term) const {
        TermStats s = stats_.term(term);
        return {s.doc_frequency, s.collection_frequency};
    }

    /// nullptr when the term is absent. Postings are sorted by doc id.
    const std::vector<Posting>* postings(const std::string& term) const {
        auto it = postings_.find(term);
        return it == postings_.end() ? nullptr : &it->second;
    }

    std::size_t doc_count() const { return docs_.size(); }
    const DocInfo& doc(std::uint32_t id) const { return docs_.at(id); }
    std::optional<std::uint32_t> doc_id(const std::string& docno) const;
    std::uint32_t term_frequency(const std::string& term, std::uint32_t doc) const;

    /// Length-prefixed binary format with magic + version; bit-identical for
    /// identical inputs.
    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

  private:
    CollectionStats stats_;
    PipelineConfig pipeline_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::vector<DocInfo> docs_;
};

struct TsvIngestReport {
    std::uint64_t ingested = 0;
    std::vector<std::pair<std::size_t, std::string>> skipped;  // (line number, line)
};

/// Reads `docno<TAB>text` lines; malformed lines are reported and skipped.
InvertedIndex build_index_from_tsv(const std::filesystem::path& path,
                                   const PipelineConfig& config,
                                   TsvIngestReport* report = nullptr);

}  // namespace drqr
