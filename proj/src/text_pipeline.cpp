#include "drqr/text_pipeline.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include "drqr/porter.hpp"

namespace drqr {

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        unsigned char uc = static_cast<unsigned char>(c);
        if (std::isalnum(uc)) {
            current.push_back(lowercase ? static_cast<char>(std::tolower(uc)) : c);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::vector<std::string> process(std::string_view text, const PipelineConfig& config) {
    std::vector<std::string> terms;
    for (auto& token : tokenize(text, config.lowercase)) {
        if (config.stopwords.contains(token)) continue;
        terms.push_back(config.stem ? porter_stem(std::move(token)) : std::move(token));
    }
    return terms;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open stopword file: " + file.string());
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n' ||
                                 line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        if (!line.empty()) words.insert(line);
    }
    return words;
}

}  // namespace drqr
