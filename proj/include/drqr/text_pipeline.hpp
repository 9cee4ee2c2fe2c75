#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace drqr {

/// Term processing configuration. The stopword set is fixed at construction;
/// applying the same config to the same text always yields the same terms.
struct PipelineConfig {
    bool lowercase = true;
    std::unordered_set<std::string> stopwords;
    bool stem = true;
};

/// Splits on any non-alphanumeric character, drops empty fragments,
/// lowercases when requested.
std::vector<std::string> tokenize(std::string_view text, bool lowercase = true);

/// tokenize -> stopword filter -> Porter stem, in that order.
std::vector<std::string> process(std::string_view text, const PipelineConfig& config);

/// Reads a stopword file, one token per line, UTF-8. Blank lines ignored.
std::unordered_set<std::string> load_stopwords(const std::filesystem::path& file);

}  // namespace drqr
