#include "drqr/mining.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "drqr/common.hpp"

namespace drqr {

void Qrels::add(const std::string& qid, const std::string& docno, int grade) {
    if (grade < 0) throw std::invalid_argument("negative relevance grade");
    auto [it, inserted] = by_qid_[qid].emplace(docno, grade);
    if (!inserted)
        throw std::invalid_argument("duplicate qrels entry for (" + qid + ", " + docno + ")");
}

int Qrels::grade(const std::string& qid, const std::string& docno) const {
    auto it = by_qid_.find(qid);
    if (it == by_qid_.end()) return 0;
    auto jt = it->second.find(docno);
    return jt == it->second.end() ? 0 : jt->second;
}

std::map<std::string, std::vector<std::string>> Qrels::relevant_by_doc() const {
    std::map<std::string, std::vector<std::string>> docs;
    for (const auto& [qid, judged] : by_qid_)
        for (const auto& [docno, grade] : judged)
            if (grade >= 1) docs[docno].push_back(qid);
    return docs;
}

std::size_t Qrels::num_relevant(const std::string& qid) const {
    auto it = by_qid_.find(qid);
    if (it == by_qid_.end()) return 0;
    std::size_t n = 0;
    for (const auto& [docno, grade] : it->second)
        if (grade >= 1) ++n;
    return n;
}

Qrels Qrels::read_trec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qrels file: " + path.string());
    Qrels qrels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string qid, iteration, docno;
        int grade;
        if (!(row >> qid >> iteration >> docno >> grade))
            throw std::runtime_error("malformed qrels line " + std::to_string(lineno) + " in " +
                                     path.string());
        qrels.add(qid, docno, grade);
    }
    return qrels;
}

void Qrels::write_trec(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write qrels file: " + path.string());
    for (const auto& [qid, judged] : by_qid_)
        for (const auto& [docno, grade] : judged)
            out << qid << " 0 " << docno << ' ' << grade << '\n';
}

std::vector<QueryPair> mine_pairs(const Qrels& qrels,
                                  const std::map<std::string, std::string>& queries,
                                  MiningReport* report) {
    std::set<std::string> missing;
    std::set<std::pair<std::string, std::string>> ordered;
    for (const auto& [docno, qids] : qrels.relevant_by_doc()) {
        std::vector<std::string> present;
        for (const auto& qid : qids) {
            if (queries.contains(qid))
                present.push_back(qid);
            else
                missing.insert(qid);
        }
        for (const auto& src : present)
            for (const auto& tgt : present)
                if (src != tgt) ordered.emplace(src, tgt);
    }

    std::vector<QueryPair> pairs;
    pairs.reserve(ordered.size());
    for (const auto& [src, tgt] : ordered)
        pairs.push_back({src, tgt, queries.at(src), queries.at(tgt)});

    if (report) {
        report->missing_qids.assign(missing.begin(), missing.end());
        report->ordered_pairs = pairs.size();
        std::set<std::pair<std::string, std::string>> unordered;
        for (const auto& [src, tgt] : ordered)
            unordered.emplace(std::min(src, tgt), std::max(src, tgt));
        report->unordered_pairs = unordered.size();
    }
    return pairs;
}

std::pair<std::vector<QueryPair>, std::vector<QueryPair>> split_pairs(std::vector<QueryPair> pairs,
                                                                      double train_fraction,
                                                                      std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("split_pairs needs a non-empty pair list");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must lie in (0, 1)");
    std::mt19937_64 rng(seed);
    deterministic_shuffle(pairs, rng);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(pairs.size())));
    n_train = std::min(n_train, pairs.size());
    std::vector<QueryPair> train(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<QueryPair> valid(pairs.begin() + static_cast<std::ptrdiff_t>(n_train), pairs.end());
    return {std::move(train), std::move(valid)};
}

void write_pairs_tsv(const std::filesystem::path& path, const std::vector<QueryPair>& pairs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write pairs file: " + path.string());
    for (const auto& p : pairs)
        out << p.src_qid << '\t' << p.tgt_qid << '\t' << p.src_text << '\t' << p.tgt_text << '\n';
}

std::vector<QueryPair> read_pairs_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open pairs file: " + path.string());
    std::vector<QueryPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 4)
            throw std::runtime_error("malformed pairs line " + std::to_string(lineno) + " in " +
                                     path.string());
        pairs.push_back({fields[0], fields[1], fields[2], fields[3]});
    }
    return pairs;
}

std::map<std::string, std::string> read_queries_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open queries file: " + path.string());
    std::map<std::string, std::string> queries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            throw std::runtime_error("malformed queries line " + std::to_string(lineno) + " in " +
                                     path.string());
        queries[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return queries;
}

}  // namespace drqr
