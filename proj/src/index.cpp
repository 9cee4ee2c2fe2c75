#include "drqr/index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace drqr {
namespace {

constexpr char kMagic[8] = {'D', 'R', 'Q', 'R', 'I', 'D', 'X', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw std::runtime_error("index file truncated");
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
        throw std::runtime_error("index file truncated");
    return v;
}
std::string read_string(std::istream& in) {
    std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    if (n > 0 && !in.read(s.data(), n)) throw std::runtime_error("index file truncated");
    return s;
}

}  // namespace

InvertedIndex InvertedIndex::build(const std::vector<std::pair<std::string, std::string>>& docs,
                                   const PipelineConfig& config) {
    InvertedIndex index;
    index.pipeline_ = config;
    std::unordered_map<std::string, std::uint32_t> seen;
    for (const auto& [docno, text] : docs) {
        if (!seen.emplace(docno, 0).second)
            throw std::invalid_argument("duplicate docno: " + docno);
        auto terms = process(text, config);
        std::uint32_t id = static_cast<std::uint32_t>(index.docs_.size());
        index.docs_.push_back({docno, static_cast<std::uint32_t>(terms.size())});
        index.stats_.num_docs_ += 1;
        index.stats_.total_terms_ += terms.size();

        std::unordered_map<std::string, std::uint32_t> tf;
        for (auto& t : terms) tf[t] += 1;
        for (auto& [term, freq] : tf) {
            index.postings_[term].push_back({id, freq});
            auto& ts = index.stats_.terms_[term];
            ts.doc_frequency += 1;
            ts.collection_frequency += freq;
        }
    }
    // postings were appended in ingestion order, already sorted by doc id
    return index;
}

std::optional<std::uint32_t> InvertedIndex::doc_id(const std::string& docno) const {
    for (std::uint32_t i = 0; i < docs_.size(); ++i)
        if (docs_[i].docno == docno) return i;
    return std::nullopt;
}

std::uint32_t InvertedIndex::term_frequency(const std::string& term, std::uint32_t doc) const {
    const auto* list = postings(term);
    if (!list) return 0;
    auto it = std::lower_bound(list->begin(), list->end(), doc,
                               [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    return (it != list->end() && it->doc == doc) ? it->tf : 0;
}

void InvertedIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write index file: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    out.put(pipeline_.lowercase ? 1 : 0);
    out.put(pipeline_.stem ? 1 : 0);
    std::vector<std::string> stopwords(pipeline_.stopwords.begin(), pipeline_.stopwords.end());
    std::sort(stopwords.begin(), stopwords.end());
    write_u32(out, static_cast<std::uint32_t>(stopwords.size()));
    for (const auto& word : stopwords) write_string(out, word);
    write_u64(out, stats_.num_docs_);
    write_u64(out, stats_.total_terms_);
    write_u64(out, docs_.size());
    for (const auto& d : docs_) {
        write_string(out, d.docno);
        write_u32(out, d.length);
    }
    // sorted term order keeps the persisted form bit-identical across builds
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    write_u64(out, terms.size());
    for (const auto* term : terms) {
        const auto& list = postings_.at(*term);
        write_string(out, *term);
        write_u64(out, list.size());
        for (const auto& p : list) {
            write_u32(out, p.doc);
            write_u32(out, p.tf);
        }
    }
    if (!out) throw std::runtime_error("failed writing index file: " + path.string());
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open index file: " + path.string());
    char magic[8] = {};
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not an index file (bad magic): " + path.string());
    std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error("unsupported index version " + std::to_string(version));

    InvertedIndex index;
    char flag = 0;
    if (!in.get(flag)) throw std::runtime_error("index file truncated");
    index.pipeline_.lowercase = flag != 0;
    if (!in.get(flag)) throw std::runtime_error("index file truncated");
    index.pipeline_.stem = flag != 0;
    std::uint32_t num_stopwords = read_u32(in);
    for (std::uint32_t i = 0; i < num_stopwords; ++i)
        index.pipeline_.stopwords.insert(read_string(in));
    index.stats_.num_docs_ = read_u64(in);
    index.stats_.total_terms_ = read_u64(in);
    std::uint64_t num_docs = read_u64(in);
    index.docs_.reserve(num_docs);
    for (std::uint64_t i = 0; i < num_docs; ++i) {
        DocInfo d;
        d.docno = read_string(in);
        d.length = read_u32(in);
        index.docs_.push_back(std::move(d));
    }
    std::uint64_t num_terms = read_u64(in);
    for (std::uint64_t i = 0; i < num_terms; ++i) {
        std::string term = read_string(in);
        std::uint64_t n = read_u64(in);
        std::vector<Posting> list;
        list.reserve(n);
        TermStats ts;
        for (std::uint64_t p = 0; p < n; ++p) {
            Posting posting;
            posting.doc = read_u32(in);
            posting.tf = read_u32(in);
            ts.doc_frequency += 1;
            ts.collection_frequency += posting.tf;
            list.push_back(posting);
        }
        index.stats_.terms_.emplace(term, ts);
        index.postings_.emplace(std::move(term), std::move(list));
    }
    return index;
}

InvertedIndex build_index_from_tsv(const std::filesystem::path& path,
                                   const PipelineConfig& config, TsvIngestReport* report) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path.string());
    std::vector<std::pair<std::string, std::string>> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            if (report) report->skipped.emplace_back(lineno, line);
            continue;
        }
        docs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
        if (report) report->ingested += 1;
    }
    return InvertedIndex::build(docs, config);
}

}  // namespace drqr
