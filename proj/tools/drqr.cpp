// drqr: end-to-end query reformulation workflows (index, mine, train,
// reformulate, retrieve, evaluate, correlate, sweep, report).
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "drqr/eval.hpp"
#include "drqr/index.hpp"
#include "drqr/mining.hpp"
#include "drqr/qpp.hpp"
#include "drqr/ranking.hpp"
#include "drqr/rl.hpp"
#include "drqr/seq2seq.hpp"
#include "drqr/text_pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot hash missing file: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof(buffer));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path))
        throw std::runtime_error("missing " + what + " file: " + path.string());
}

// Every run records its effective configuration, seed and artifact hashes.
struct Manifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::vector<fs::path> inputs;
    std::vector<fs::path> outputs;

    void write(const fs::path& path) const {
        json doc;
        doc["command"] = command;
        doc["config"] = config;
        doc["seed"] = seed;
        json in_hashes = json::object();
        for (const auto& p : inputs) in_hashes[p.string()] = sha256_file(p);
        json out_hashes = json::object();
        for (const auto& p : outputs) out_hashes[p.string()] = sha256_file(p);
        doc["inputs"] = in_hashes;
        doc["outputs"] = out_hashes;
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
        out << doc.dump(2) << '\n';
    }
};

fs::path manifest_path(const fs::path& primary_output, const std::string& override_path) {
    if (!override_path.empty()) return override_path;
    fs::path p = primary_output;
    p += ".manifest.json";
    return p;
}

json load_config_file(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            fs::path path = argv[i + 1];
            require_file(path, "config");
            std::ifstream in(path);
            json cfg = json::parse(in);
            return cfg;
        }
    }
    return json::object();
}

template <class T>
void config_default(const json& cfg, const std::string& key, T& var) {
    if (cfg.contains(key)) var = cfg.at(key).get<T>();
}

drqr::PipelineConfig pipeline_from_flags(const std::string& stopword_file, bool no_stem,
                                         bool no_lowercase) {
    drqr::PipelineConfig config;
    config.lowercase = !no_lowercase;
    config.stem = !no_stem;
    if (!stopword_file.empty()) {
        require_file(stopword_file, "stopword");
        config.stopwords = drqr::load_stopwords(stopword_file);
    }
    return config;
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    for (const auto& item : split_list(csv)) out.push_back(std::stod(item));
    for (double v : out)
        if (v < 0.0 || v > 1.0)
            throw std::runtime_error("grid values must lie in [0, 1]");
    return out;
}

// metric name -> per-query evaluator ("map" or "ndcg@K")
double query_metric(const std::string& metric, const drqr::RankedList& run,
                    const drqr::Qrels& qrels) {
    if (metric == "map") return drqr::average_precision(run, qrels);
    if (metric.rfind("ndcg@", 0) == 0) {
        std::size_t k = std::stoul(metric.substr(5));
        return drqr::ndcg_at_k(run, qrels, k);
    }
    throw std::runtime_error("unknown metric: " + metric + " (expected map or ndcg@K)");
}

std::map<std::string, double> per_query_metric(const std::string& metric,
                                               const std::vector<drqr::RankedList>& runs,
                                               const drqr::Qrels& qrels) {
    std::map<std::string, double> values;
    for (const auto& run : runs) values[run.qid] = query_metric(metric, run, qrels);
    return values;
}

double mean_of(const std::map<std::string, double>& values) {
    if (values.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [qid, v] : values) total += v;
    return total / static_cast<double>(values.size());
}

drqr::WeightedQuery processed_query(const std::string& qid, const std::string& text,
                                    const drqr::PipelineConfig& pipeline) {
    auto terms = drqr::process(text, pipeline);
    return drqr::WeightedQuery::from_terms(qid, terms);
}

struct RetrieveOptions {
    drqr::RankingModel model = drqr::RankingModel::Dph;
    std::size_t k = 1000;
    bool expand = false;
    std::size_t qe_docs = 3;
    std::size_t qe_terms = 10;
    std::string tag = "drqr";
};

drqr::RankedList run_one_query(const drqr::InvertedIndex& index, const drqr::WeightedQuery& query,
                               const RetrieveOptions& opts) {
    auto run = drqr::retrieve(opts.model, index, query, opts.k, opts.tag);
    if (opts.expand && !run.entries.empty()) {
        auto expanded = drqr::bo1_expand(index, query, run, opts.qe_docs, opts.qe_terms);
        run = drqr::retrieve(opts.model, index, expanded, opts.k, opts.tag);
    }
    return run;
}

std::vector<drqr::RankedList> run_queries(const drqr::InvertedIndex& index,
                                          const std::map<std::string, std::string>& queries,
                                          const std::map<std::string, std::string>* reformulations,
                                          double theta, const RetrieveOptions& opts) {
    std::vector<drqr::RankedList> runs;
    for (const auto& [qid, text] : queries) {
        auto q0 = processed_query(qid, text, index.pipeline());
        drqr::WeightedQuery final_query = q0;
        if (reformulations) {
            auto it = reformulations->find(qid);
            drqr::WeightedQuery qr{qid, {}};
            if (it != reformulations->end())
                qr = processed_query(qid, it->second, index.pipeline());
            final_query = drqr::mix_queries(q0, qr, theta);
        }
        runs.push_back(run_one_query(index, final_query, opts));
    }
    return runs;
}

// ------------------------------------------------------------- subcommands

int cmd_index_build(const json& cfg, std::string corpus, std::string output,
                    std::string stopwords, bool no_stem, bool no_lowercase,
                    std::string manifest_override) {
    require_file(corpus, "corpus");
    auto pipeline = pipeline_from_flags(stopwords, no_stem, no_lowercase);
    drqr::TsvIngestReport report;
    auto index = drqr::build_index_from_tsv(corpus, pipeline, &report);
    index.save(output);
    std::cout << "indexed " << report.ingested << " documents, skipped " << report.skipped.size()
              << " malformed lines\n";
    for (const auto& [line, text] : report.skipped)
        std::cerr << "skipped line " << line << ": " << text << '\n';
    std::cout << "docs=" << index.stats().num_docs() << " terms=" << index.stats().total_terms()
              << " vocab=" << index.stats().terms().size() << '\n';

    Manifest manifest;
    manifest.command = "index build";
    manifest.config = {{"corpus", corpus},
                       {"output", output},
                       {"stopwords", stopwords},
                       {"stem", !no_stem},
                       {"lowercase", !no_lowercase}};
    (void)cfg;
    manifest.inputs = {corpus};
    if (!stopwords.empty()) manifest.inputs.push_back(stopwords);
    manifest.outputs = {output};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_mine_pairs(std::string qrels_path, std::string queries_path, std::string output,
                   std::string manifest_override) {
    require_file(qrels_path, "qrels");
    require_file(queries_path, "queries");
    auto qrels = drqr::Qrels::read_trec(qrels_path);
    auto queries = drqr::read_queries_tsv(queries_path);
    drqr::MiningReport report;
    auto pairs = drqr::mine_pairs(qrels, queries, &report);
    drqr::write_pairs_tsv(output, pairs);
    std::cout << "ordered_pairs=" << report.ordered_pairs
              << " unordered_pairs=" << report.unordered_pairs << '\n';
    if (!report.missing_qids.empty()) {
        std::cerr << "skipped " << report.missing_qids.size()
                  << " qids with judgments but no query text:";
        for (const auto& qid : report.missing_qids) std::cerr << ' ' << qid;
        std::cerr << '\n';
    }

    Manifest manifest;
    manifest.command = "mine pairs";
    manifest.config = {{"qrels", qrels_path},
                       {"queries", queries_path},
                       {"output", output},
                       {"ordered_pairs", report.ordered_pairs},
                       {"unordered_pairs", report.unordered_pairs}};
    manifest.inputs = {qrels_path, queries_path};
    manifest.outputs = {output};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_train_ml(std::string pairs_path, std::string output, std::string history_path,
                 double train_fraction, std::size_t min_frequency, Eigen::Index hidden,
                 Eigen::Index emb, int max_len, drqr::TrainConfig train, std::uint64_t seed,
                 std::string manifest_override) {
    require_file(pairs_path, "pairs");
    auto pairs = drqr::read_pairs_tsv(pairs_path);
    auto [train_pairs, valid_pairs] = drqr::split_pairs(pairs, train_fraction, seed);
    auto vocab = drqr::Vocabulary::build(train_pairs, min_frequency);

    drqr::ModelConfig model_config;
    model_config.hidden_dim = hidden;
    model_config.emb_dim = emb;
    model_config.max_len = max_len;
    model_config.dropout = train.dropout;
    auto params = drqr::ModelParameters::init(model_config, vocab.size(), seed);

    train.seed = seed;
    auto result = drqr::train_ml(params, vocab, train_pairs, valid_pairs, train);
    drqr::save_checkpoint(output, params, vocab);
    if (history_path.empty()) history_path = output + ".history.tsv";
    drqr::write_ml_history(history_path, result);
    std::cout << "epochs=" << result.history.size() << " best_epoch=" << result.best_epoch
              << " best_valid_loss=" << result.history[result.best_epoch].valid << '\n';

    Manifest manifest;
    manifest.command = "train ml";
    manifest.config = {{"pairs", pairs_path},       {"output", output},
                       {"history", history_path},   {"train_fraction", train_fraction},
                       {"min_frequency", min_frequency}, {"hidden", hidden},
                       {"emb", emb},                {"max_len", max_len},
                       {"learning_rate", train.learning_rate}, {"batch_size", train.batch_size},
                       {"max_epochs", train.max_epochs}, {"patience", train.patience},
                       {"dropout", train.dropout},  {"grad_clip", train.grad_clip}};
    manifest.seed = seed;
    manifest.inputs = {pairs_path};
    manifest.outputs = {output, history_path};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_train_rl(std::string checkpoint, std::string pairs_path, std::string index_path,
                 std::string output, std::string history_path, double train_fraction,
                 double lambda, std::string predictor_name, drqr::TrainingSchedule schedule,
                 std::uint64_t seed, std::string manifest_override) {
    require_file(checkpoint, "checkpoint");
    require_file(pairs_path, "pairs");
    require_file(index_path, "index");
    auto [params, vocab] = drqr::load_checkpoint(checkpoint);
    auto pairs = drqr::read_pairs_tsv(pairs_path);
    auto [train_pairs, valid_pairs] = drqr::split_pairs(pairs, train_fraction, seed);
    auto index = drqr::InvertedIndex::load(index_path);

    drqr::RewardConfig reward;
    reward.lambda = lambda;
    reward.predictor = drqr::parse_predictor(predictor_name);

    // calibration over the training-query texts, frozen for the whole run
    std::vector<std::vector<std::string>> reference;
    for (const auto& pair : train_pairs) {
        auto terms = drqr::process(pair.src_text, index.pipeline());
        if (!terms.empty()) reference.push_back(std::move(terms));
    }
    reward.calibration = drqr::calibrate(index.stats(), reference, reward.predictor);

    auto result = drqr::train_drqr(params, vocab, train_pairs, valid_pairs, index.stats(), reward,
                                   schedule, seed);
    drqr::save_checkpoint(output, params, vocab);
    if (history_path.empty()) history_path = output + ".reward_history.tsv";
    drqr::write_rl_history(history_path, result);
    std::cout << "epochs=" << result.history.size() - 1 << " best_epoch=" << result.best_epoch
              << " best_valid_reward=" << result.history[result.best_epoch].valid_reward << '\n';

    Manifest manifest;
    manifest.command = "train rl";
    manifest.config = {{"checkpoint", checkpoint},
                       {"pairs", pairs_path},
                       {"index", index_path},
                       {"output", output},
                       {"history", history_path},
                       {"train_fraction", train_fraction},
                       {"lambda", lambda},
                       {"predictor", predictor_name},
                       {"calibration_min", reward.calibration.min},
                       {"calibration_max", reward.calibration.max},
                       {"rl_epochs", schedule.n_rl_epochs},
                       {"rl_learning_rate", schedule.rl_learning_rate},
                       {"rl_batch_size", schedule.rl_batch_size},
                       {"patience", schedule.patience}};
    manifest.seed = seed;
    manifest.inputs = {checkpoint, pairs_path, index_path};
    manifest.outputs = {output, history_path};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_reformulate(std::string checkpoint, std::string queries_path, std::string output,
                    std::string manifest_override) {
    require_file(checkpoint, "checkpoint");
    require_file(queries_path, "queries");
    auto [params, vocab] = drqr::load_checkpoint(checkpoint);
    auto queries = drqr::read_queries_tsv(queries_path);
    std::ofstream out(output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write reformulations: " + output);
    for (const auto& [qid, text] : queries) {
        auto tokens = drqr::tokenize(text);
        std::string joined;
        if (!tokens.empty()) {
            auto decoded = drqr::greedy_decode(params, vocab, tokens, params.config.max_len);
            for (std::size_t i = 0; i < decoded.size(); ++i) {
                if (i > 0) joined += ' ';
                joined += decoded[i];
            }
        }
        out << qid << '\t' << joined << '\n';
    }
    out.close();

    Manifest manifest;
    manifest.command = "reformulate";
    manifest.config = {{"checkpoint", checkpoint}, {"queries", queries_path}, {"output", output}};
    manifest.inputs = {checkpoint, queries_path};
    manifest.outputs = {output};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_retrieve(std::string index_path, std::string queries_path, std::string output,
                 std::string model_name, std::size_t k, bool qe, std::size_t qe_docs,
                 std::size_t qe_terms, std::string reformulations_path, double theta,
                 std::string tag, std::string manifest_override) {
    require_file(index_path, "index");
    require_file(queries_path, "queries");
    auto index = drqr::InvertedIndex::load(index_path);
    auto queries = drqr::read_queries_tsv(queries_path);

    RetrieveOptions opts;
    opts.model = drqr::parse_ranking_model(model_name);
    opts.k = k;
    opts.expand = qe;
    opts.qe_docs = qe_docs;
    opts.qe_terms = qe_terms;
    opts.tag = tag;

    std::optional<std::map<std::string, std::string>> reformulations;
    if (!reformulations_path.empty()) {
        require_file(reformulations_path, "reformulations");
        reformulations = drqr::read_queries_tsv(reformulations_path);
    }
    auto runs = run_queries(index, queries, reformulations ? &*reformulations : nullptr, theta,
                            opts);
    drqr::write_trec_run(fs::path(output), runs);
    std::cout << "retrieved " << runs.size() << " queries to " << output << '\n';

    Manifest manifest;
    manifest.command = "retrieve";
    manifest.config = {{"index", index_path}, {"queries", queries_path},
                       {"output", output},    {"model", model_name},
                       {"k", k},              {"qe", qe},
                       {"qe_docs", qe_docs},  {"qe_terms", qe_terms},
                       {"reformulations", reformulations_path}, {"theta", theta},
                       {"tag", tag}};
    manifest.inputs = {index_path, queries_path};
    if (!reformulations_path.empty()) manifest.inputs.push_back(reformulations_path);
    manifest.outputs = {output};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_evaluate(std::string run_path, std::string qrels_path, std::string output,
                 std::string metrics_csv, std::string per_query_path,
                 std::string manifest_override) {
    require_file(run_path, "run");
    require_file(qrels_path, "qrels");
    auto runs = drqr::read_trec_run(run_path);
    auto qrels = drqr::Qrels::read_trec(qrels_path);
    auto metrics = split_list(metrics_csv);
    if (metrics.empty()) throw std::runtime_error("no metrics requested");

    std::ofstream out(output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write evaluation: " + output);
    std::ofstream per_query;
    if (!per_query_path.empty()) {
        per_query.open(per_query_path, std::ios::trunc);
        per_query << "qid\tmetric\tvalue\n";
    }
    std::size_t unjudged = 0;
    for (const auto& run : runs)
        if (qrels.num_relevant(run.qid) == 0) ++unjudged;
    if (unjudged > 0)
        std::cerr << unjudged << " run queries have no relevant judgments; their metrics are"
                     " defined 0\n";

    out << "metric\tvalue\tnum_queries\n";
    for (const auto& metric : metrics) {
        auto values = per_query_metric(metric, runs, qrels);
        out << metric << '\t' << mean_of(values) << '\t' << values.size() << '\n';
        std::cout << metric << " = " << mean_of(values) << " over " << values.size()
                  << " queries\n";
        if (per_query.is_open())
            for (const auto& [qid, value] : values)
                per_query << qid << '\t' << metric << '\t' << value << '\n';
    }
    out.close();
    if (per_query.is_open()) per_query.close();

    Manifest manifest;
    manifest.command = "evaluate";
    manifest.config = {{"run", run_path},
                       {"qrels", qrels_path},
                       {"output", output},
                       {"metrics", metrics_csv},
                       {"per_query", per_query_path}};
    manifest.inputs = {run_path, qrels_path};
    manifest.outputs = {output};
    if (!per_query_path.empty()) manifest.outputs.push_back(per_query_path);
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_qpp_predict(std::string index_path, std::string queries_path, std::string output,
                    std::string manifest_override) {
    require_file(index_path, "index");
    require_file(queries_path, "queries");
    auto index = drqr::InvertedIndex::load(index_path);
    auto queries = drqr::read_queries_tsv(queries_path);
    std::ofstream out(output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write predictor table: " + output);
    out << "qid\tkind\tvalue\tscored_terms\n";
    for (const auto& [qid, text] : queries) {
        auto terms = drqr::process(text, index.pipeline());
        for (auto kind : drqr::kAllPredictors) {
            drqr::QppScore score{kind, 0.0, 0};
            if (!terms.empty() || kind == drqr::PredictorKind::QueryLength)
                score = drqr::predict(index.stats(), terms, kind);
            out << qid << '\t' << drqr::predictor_name(kind) << '\t' << score.value << '\t'
                << score.num_scored_terms << '\n';
        }
    }
    out.close();

    Manifest manifest;
    manifest.command = "qpp predict";
    manifest.config = {{"index", index_path}, {"queries", queries_path}, {"output", output}};
    manifest.inputs = {index_path, queries_path};
    manifest.outputs = {output};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_qpp_correlate(std::string index_path, std::string queries_path, std::string run_path,
                      std::string qrels_path, std::string output, std::string json_path,
                      std::size_t num_permutations, std::uint64_t seed,
                      std::string manifest_override) {
    require_file(index_path, "index");
    require_file(queries_path, "queries");
    require_file(run_path, "run");
    require_file(qrels_path, "qrels");
    auto index = drqr::InvertedIndex::load(index_path);
    auto queries = drqr::read_queries_tsv(queries_path);
    auto runs = drqr::read_trec_run(run_path);
    auto qrels = drqr::Qrels::read_trec(qrels_path);

    const std::vector<std::string> metrics = {"map", "ndcg@10"};
    std::map<std::string, std::map<std::string, double>> metric_values;
    for (const auto& metric : metrics) metric_values[metric] = per_query_metric(metric, runs, qrels);

    // predictor values over the queries present in the run
    std::map<drqr::PredictorKind, std::map<std::string, double>> predictor_values;
    for (auto kind : drqr::kAllPredictors) {
        for (const auto& run : runs) {
            auto it = queries.find(run.qid);
            if (it == queries.end())
                throw std::runtime_error("run qid missing from queries file: " + run.qid);
            auto terms = drqr::process(it->second, index.pipeline());
            double value = terms.empty() && kind != drqr::PredictorKind::QueryLength
                               ? 0.0
                               : drqr::predict(index.stats(), terms, kind).value;
            predictor_values[kind][run.qid] = value;
        }
    }

    struct Row {
        drqr::CorrelationReport report;
        double fisher_vs_best_spearman = 1.0;
        bool degraded = false;
        bool defined = true;
    };
    std::map<std::string, std::vector<Row>> rows_by_metric;
    json summary;
    summary["note"] =
        "fisher-z treats the compared correlations as independent samples; the query sets overlap";

    std::ofstream out(output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write correlation table: " + output);
    out << "predictor\tmetric\tspearman_rho\tspearman_p\tspearman_sig\tkendall_tau\tkendall_p\t"
           "kendall_sig\tfisher_vs_best_p\tdegraded\tn\n";

    for (const auto& metric : metrics) {
        std::vector<Row> rows;
        for (auto kind : drqr::kAllPredictors) {
            std::vector<double> xs, ys;
            for (const auto& run : runs) {
                xs.push_back(predictor_values[kind][run.qid]);
                ys.push_back(metric_values[metric][run.qid]);
            }
            Row row;
            row.report.predictor = kind;
            row.report.metric = metric;
            row.report.n = xs.size();
            try {
                row.report.spearman_rho =
                    drqr::rank_correlation(xs, ys, drqr::CorrelationKind::Spearman);
                row.report.kendall_tau =
                    drqr::rank_correlation(xs, ys, drqr::CorrelationKind::Kendall);
                row.report.p_spearman = drqr::permutation_significance(
                    xs, ys, drqr::CorrelationKind::Spearman, num_permutations, seed);
                row.report.p_kendall = drqr::permutation_significance(
                    xs, ys, drqr::CorrelationKind::Kendall, num_permutations, seed);
            } catch (const std::invalid_argument&) {
                // constant predictor or metric column: correlation undefined
                row.defined = false;
                row.report.spearman_rho = std::numeric_limits<double>::quiet_NaN();
                row.report.kendall_tau = std::numeric_limits<double>::quiet_NaN();
                row.report.p_spearman = std::numeric_limits<double>::quiet_NaN();
                row.report.p_kendall = std::numeric_limits<double>::quiet_NaN();
            }
            rows.push_back(row);
        }
        // significant degradation from the best spearman in this column
        const Row* best = nullptr;
        for (const auto& row : rows)
            if (row.defined && (!best || row.report.spearman_rho > best->report.spearman_rho))
                best = &row;
        for (auto& row : rows) {
            if (best && &row != best && row.defined &&
                std::abs(row.report.spearman_rho) < 1.0 &&
                std::abs(best->report.spearman_rho) < 1.0) {
                row.fisher_vs_best_spearman = drqr::fisher_z_compare(
                    best->report.spearman_rho, best->report.n, row.report.spearman_rho,
                    row.report.n);
                row.degraded = row.fisher_vs_best_spearman < 0.05;
            }
        }
        for (const auto& row : rows) {
            out << drqr::predictor_name(row.report.predictor) << '\t' << metric << '\t'
                << row.report.spearman_rho << '\t' << row.report.p_spearman << '\t'
                << (row.report.p_spearman < 0.05 ? "*" : "") << '\t' << row.report.kendall_tau
                << '\t' << row.report.p_kendall << '\t'
                << (row.report.p_kendall < 0.05 ? "*" : "") << '\t'
                << row.fisher_vs_best_spearman << '\t' << (row.degraded ? "<" : "") << '\t'
                << row.report.n << '\n';
            json entry = {{"predictor", drqr::predictor_name(row.report.predictor)},
                          {"metric", metric},
                          {"spearman_rho", row.report.spearman_rho},
                          {"spearman_p", row.report.p_spearman},
                          {"kendall_tau", row.report.kendall_tau},
                          {"kendall_p", row.report.p_kendall},
                          {"fisher_vs_best_p", row.fisher_vs_best_spearman},
                          {"degraded_from_best", row.degraded},
                          {"n", row.report.n}};
            summary["correlations"].push_back(entry);
        }
        rows_by_metric[metric] = rows;
    }
    out.close();
    if (!json_path.empty()) {
        std::ofstream js(json_path, std::ios::trunc);
        js << summary.dump(2) << '\n';
    }

    Manifest manifest;
    manifest.command = "qpp correlate";
    manifest.config = {{"index", index_path},   {"queries", queries_path},
                       {"run", run_path},       {"qrels", qrels_path},
                       {"output", output},      {"json", json_path},
                       {"permutations", num_permutations}};
    manifest.seed = seed;
    manifest.inputs = {index_path, queries_path, run_path, qrels_path};
    manifest.outputs = {output};
    if (!json_path.empty()) manifest.outputs.push_back(json_path);
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_sweep(std::string index_path, std::string queries_path, std::string qrels_path,
              std::string reformulations_template, std::string lambdas_csv,
              std::string thetas_csv, std::string output, std::string model_name,
              std::string metric, std::size_t k, bool qe, std::string manifest_override) {
    require_file(index_path, "index");
    require_file(queries_path, "queries");
    require_file(qrels_path, "qrels");
    auto index = drqr::InvertedIndex::load(index_path);
    auto queries = drqr::read_queries_tsv(queries_path);
    auto qrels = drqr::Qrels::read_trec(qrels_path);
    auto lambdas = parse_grid(lambdas_csv);
    auto thetas = parse_grid(thetas_csv);

    RetrieveOptions opts;
    opts.model = drqr::parse_ranking_model(model_name);
    opts.k = k;
    opts.expand = qe;

    auto reform_path_for = [&](double lambda) {
        std::string path = reformulations_template;
        auto pos = path.find("{lambda}");
        if (pos != std::string::npos) {
            std::ostringstream formatted;
            formatted << lambda;
            path.replace(pos, 8, formatted.str());
        }
        return path;
    };

    std::ofstream out(output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write sweep table: " + output);
    out << "lambda\ttheta\t" << metric << "\n";
    double best_value = -1.0;
    double best_lambda = 0.0, best_theta = 0.0;
    std::size_t cells = 0;
    std::vector<fs::path> reform_inputs;
    for (double lambda : lambdas) {
        fs::path reform_path = reform_path_for(lambda);
        require_file(reform_path, "reformulations");
        reform_inputs.push_back(reform_path);
        auto reformulations = drqr::read_queries_tsv(reform_path);
        for (double theta : thetas) {
            auto runs = run_queries(index, queries, &reformulations, theta, opts);
            double value = mean_of(per_query_metric(metric, runs, qrels));
            out << lambda << '\t' << theta << '\t' << value << '\n';
            ++cells;
            if (value > best_value) {
                best_value = value;
                best_lambda = lambda;
                best_theta = theta;
            }
        }
    }
    out << "# best\t" << best_lambda << '\t' << best_theta << '\t' << best_value << '\n';
    out.close();
    std::cout << "swept " << cells << " cells; best " << metric << "=" << best_value
              << " at lambda=" << best_lambda << " theta=" << best_theta << '\n';

    Manifest manifest;
    manifest.command = "sweep";
    manifest.config = {{"index", index_path},
                       {"queries", queries_path},
                       {"qrels", qrels_path},
                       {"reformulations_template", reformulations_template},
                       {"lambdas", lambdas_csv},
                       {"thetas", thetas_csv},
                       {"output", output},
                       {"model", model_name},
                       {"metric", metric},
                       {"k", k},
                       {"qe", qe},
                       {"cells", cells},
                       {"best_lambda", best_lambda},
                       {"best_theta", best_theta},
                       {"best_value", best_value}};
    manifest.inputs = {index_path, queries_path, qrels_path};
    for (const auto& p : reform_inputs) manifest.inputs.push_back(p);
    manifest.outputs = {output};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

int cmd_report_histogram(std::string baseline_path, std::string treatment_path,
                         std::string qrels_path, std::string metric, double epsilon,
                         std::string output, std::string manifest_override) {
    require_file(baseline_path, "baseline run");
    require_file(treatment_path, "treatment run");
    require_file(qrels_path, "qrels");
    auto qrels = drqr::Qrels::read_trec(qrels_path);
    auto baseline = per_query_metric(metric, drqr::read_trec_run(baseline_path), qrels);
    auto treatment = per_query_metric(metric, drqr::read_trec_run(treatment_path), qrels);
    auto hist = drqr::delta_histogram(baseline, treatment, epsilon);

    json doc = {{"metric", metric},
                {"epsilon", epsilon},
                {"improved", hist.improved},
                {"degraded", hist.degraded},
                {"unchanged", hist.unchanged},
                {"num_queries", hist.improved + hist.degraded + hist.unchanged}};
    std::ofstream out(output, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write histogram report: " + output);
    out << doc.dump(2) << '\n';
    out.close();
    std::cout << "improved=" << hist.improved << " degraded=" << hist.degraded
              << " unchanged=" << hist.unchanged << '\n';

    Manifest manifest;
    manifest.command = "report histogram";
    manifest.config = {{"baseline", baseline_path}, {"treatment", treatment_path},
                       {"qrels", qrels_path},       {"metric", metric},
                       {"epsilon", epsilon},        {"output", output}};
    manifest.inputs = {baseline_path, treatment_path, qrels_path};
    manifest.outputs = {output};
    manifest.write(manifest_path(output, manifest_override));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep reinforced query reformulation pipeline"};
    app.require_subcommand(1);

    json cfg;
    try {
        cfg = load_config_file(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with flag defaults");

    std::uint64_t seed = 1;
    config_default(cfg, "seed", seed);
    app.add_option("--seed", seed, "random seed (overrides config)");

    int exit_code = 0;
    auto guard = [&](auto&& fn) {
        return [&exit_code, fn]() {
            try {
                exit_code = fn();
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << '\n';
                exit_code = 1;
            }
        };
    };

    // ---- index build
    auto* index_cmd = app.add_subcommand("index", "inverted index operations");
    index_cmd->require_subcommand(1);
    auto* index_build = index_cmd->add_subcommand("build", "build an index from a TSV corpus");
    std::string ib_corpus, ib_output, ib_stopwords, ib_manifest;
    bool ib_no_stem = false, ib_no_lowercase = false;
    config_default(cfg, "corpus", ib_corpus);
    config_default(cfg, "index", ib_output);
    config_default(cfg, "stopwords", ib_stopwords);
    index_build->add_option("--corpus", ib_corpus, "docno<TAB>text corpus")->required();
    index_build->add_option("--output", ib_output, "index output path")->required();
    index_build->add_option("--stopwords", ib_stopwords, "stopword list, one per line");
    index_build->add_flag("--no-stem", ib_no_stem, "disable Porter stemming");
    index_build->add_flag("--no-lowercase", ib_no_lowercase, "keep case");
    index_build->add_option("--manifest", ib_manifest, "manifest path override");
    index_build->callback(guard([&] {
        return cmd_index_build(cfg, ib_corpus, ib_output, ib_stopwords, ib_no_stem,
                               ib_no_lowercase, ib_manifest);
    }));

    // ---- mine pairs
    auto* mine_cmd = app.add_subcommand("mine", "training data mining");
    mine_cmd->require_subcommand(1);
    auto* mine_pairs_cmd = mine_cmd->add_subcommand("pairs", "mine paraphrase pairs from qrels");
    std::string mp_qrels, mp_queries, mp_output, mp_manifest;
    mine_pairs_cmd->add_option("--qrels", mp_qrels, "TREC qrels")->required();
    mine_pairs_cmd->add_option("--queries", mp_queries, "qid<TAB>text queries")->required();
    mine_pairs_cmd->add_option("--output", mp_output, "pairs TSV output")->required();
    mine_pairs_cmd->add_option("--manifest", mp_manifest, "manifest path override");
    mine_pairs_cmd->callback(
        guard([&] { return cmd_mine_pairs(mp_qrels, mp_queries, mp_output, mp_manifest); }));

    // ---- train ml / train rl
    auto* train_cmd = app.add_subcommand("train", "model training");
    train_cmd->require_subcommand(1);

    auto* train_ml_cmd = train_cmd->add_subcommand("ml", "teacher-forced pretraining");
    std::string tm_pairs, tm_output, tm_history, tm_manifest;
    double tm_fraction = 0.9;
    std::size_t tm_min_freq = 1;
    Eigen::Index tm_hidden = 32, tm_emb = 32;
    int tm_max_len = 20;
    drqr::TrainConfig tm_train;
    config_default(cfg, "pairs", tm_pairs);
    config_default(cfg, "hidden", tm_hidden);
    config_default(cfg, "emb", tm_emb);
    train_ml_cmd->add_option("--pairs", tm_pairs, "pairs TSV")->required();
    train_ml_cmd->add_option("--output", tm_output, "checkpoint output")->required();
    train_ml_cmd->add_option("--history", tm_history, "loss history TSV");
    train_ml_cmd->add_option("--train-fraction", tm_fraction, "train split fraction");
    train_ml_cmd->add_option("--min-frequency", tm_min_freq, "vocabulary frequency threshold");
    train_ml_cmd->add_option("--hidden", tm_hidden, "encoder/decoder hidden size");
    train_ml_cmd->add_option("--emb", tm_emb, "embedding size");
    train_ml_cmd->add_option("--max-len", tm_max_len, "maximum decode length");
    train_ml_cmd->add_option("--learning-rate", tm_train.learning_rate, "Adam learning rate");
    train_ml_cmd->add_option("--batch-size", tm_train.batch_size, "batch size");
    train_ml_cmd->add_option("--epochs", tm_train.max_epochs, "maximum epochs");
    train_ml_cmd->add_option("--patience", tm_train.patience, "early-stop patience");
    train_ml_cmd->add_option("--dropout", tm_train.dropout, "dropout rate");
    train_ml_cmd->add_option("--grad-clip", tm_train.grad_clip, "global gradient-norm clip");
    train_ml_cmd->add_option("--manifest", tm_manifest, "manifest path override");
    train_ml_cmd->callback(guard([&] {
        return cmd_train_ml(tm_pairs, tm_output, tm_history, tm_fraction, tm_min_freq, tm_hidden,
                            tm_emb, tm_max_len, tm_train, seed, tm_manifest);
    }));

    auto* train_rl_cmd = train_cmd->add_subcommand("rl", "self-critic REINFORCE fine-tuning");
    std::string tr_checkpoint, tr_pairs, tr_index, tr_output, tr_history, tr_manifest;
    std::string tr_predictor = "AvgSCQ";
    double tr_fraction = 0.9, tr_lambda = 0.5;
    drqr::TrainingSchedule tr_schedule;
    config_default(cfg, "lambda", tr_lambda);
    config_default(cfg, "predictor", tr_predictor);
    train_rl_cmd->add_option("--checkpoint", tr_checkpoint, "pretrained checkpoint")->required();
    train_rl_cmd->add_option("--pairs", tr_pairs, "pairs TSV")->required();
    train_rl_cmd->add_option("--index", tr_index, "index for collection statistics")->required();
    train_rl_cmd->add_option("--output", tr_output, "checkpoint output")->required();
    train_rl_cmd->add_option("--history", tr_history, "reward history TSV");
    train_rl_cmd->add_option("--train-fraction", tr_fraction, "train split fraction");
    train_rl_cmd->add_option("--lambda", tr_lambda, "F1 weight in the combined reward");
    train_rl_cmd->add_option("--predictor", tr_predictor, "QPP predictor kind");
    train_rl_cmd->add_option("--rl-epochs", tr_schedule.n_rl_epochs, "RL epochs");
    train_rl_cmd->add_option("--rl-learning-rate", tr_schedule.rl_learning_rate, "RL Adam rate");
    train_rl_cmd->add_option("--rl-batch-size", tr_schedule.rl_batch_size, "RL batch size");
    train_rl_cmd->add_option("--patience", tr_schedule.patience, "early-stop patience");
    train_rl_cmd->add_option("--manifest", tr_manifest, "manifest path override");
    train_rl_cmd->callback(guard([&] {
        return cmd_train_rl(tr_checkpoint, tr_pairs, tr_index, tr_output, tr_history, tr_fraction,
                            tr_lambda, tr_predictor, tr_schedule, seed, tr_manifest);
    }));

    // ---- reformulate
    auto* reform_cmd = app.add_subcommand("reformulate", "greedy-decode reformulations");
    std::string rf_checkpoint, rf_queries, rf_output, rf_manifest;
    reform_cmd->add_option("--checkpoint", rf_checkpoint, "trained checkpoint")->required();
    reform_cmd->add_option("--queries", rf_queries, "qid<TAB>text queries")->required();
    reform_cmd->add_option("--output", rf_output, "reformulations TSV")->required();
    reform_cmd->add_option("--manifest", rf_manifest, "manifest path override");
    reform_cmd->callback(guard(
        [&] { return cmd_reformulate(rf_checkpoint, rf_queries, rf_output, rf_manifest); }));

    // ---- retrieve
    auto* retrieve_cmd = app.add_subcommand("retrieve", "rank documents for queries");
    std::string rt_index, rt_queries, rt_output, rt_model = "dph", rt_reforms, rt_tag = "drqr",
                rt_manifest;
    std::size_t rt_k = 1000, rt_qe_docs = 3, rt_qe_terms = 10;
    bool rt_qe = false;
    double rt_theta = 0.0;
    config_default(cfg, "index", rt_index);
    config_default(cfg, "model", rt_model);
    config_default(cfg, "theta", rt_theta);
    retrieve_cmd->add_option("--index", rt_index, "index path")->required();
    retrieve_cmd->add_option("--queries", rt_queries, "qid<TAB>text queries")->required();
    retrieve_cmd->add_option("--output", rt_output, "TREC run output")->required();
    retrieve_cmd->add_option("--model", rt_model, "dph or bm25");
    retrieve_cmd->add_option("--k", rt_k, "retrieval depth");
    retrieve_cmd->add_flag("--qe", rt_qe, "apply Bo1 query expansion");
    retrieve_cmd->add_option("--qe-docs", rt_qe_docs, "Bo1 feedback documents");
    retrieve_cmd->add_option("--qe-terms", rt_qe_terms, "Bo1 expansion terms");
    retrieve_cmd->add_option("--reformulations", rt_reforms, "qid<TAB>text reformulations");
    retrieve_cmd->add_option("--theta", rt_theta, "reformulation mixing weight");
    retrieve_cmd->add_option("--tag", rt_tag, "run tag");
    retrieve_cmd->add_option("--manifest", rt_manifest, "manifest path override");
    retrieve_cmd->callback(guard([&] {
        return cmd_retrieve(rt_index, rt_queries, rt_output, rt_model, rt_k, rt_qe, rt_qe_docs,
                            rt_qe_terms, rt_reforms, rt_theta, rt_tag, rt_manifest);
    }));

    // ---- evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "score a run against qrels");
    std::string ev_run, ev_qrels, ev_output, ev_metrics = "map,ndcg@10", ev_per_query, ev_manifest;
    eval_cmd->add_option("--run", ev_run, "TREC run file")->required();
    eval_cmd->add_option("--qrels", ev_qrels, "TREC qrels file")->required();
    eval_cmd->add_option("--output", ev_output, "metrics TSV output")->required();
    eval_cmd->add_option("--metrics", ev_metrics, "comma list: map,ndcg@10");
    eval_cmd->add_option("--per-query", ev_per_query, "per-query TSV output");
    eval_cmd->add_option("--manifest", ev_manifest, "manifest path override");
    eval_cmd->callback(guard([&] {
        return cmd_evaluate(ev_run, ev_qrels, ev_output, ev_metrics, ev_per_query, ev_manifest);
    }));

    // ---- qpp predict / qpp correlate
    auto* qpp_cmd = app.add_subcommand("qpp", "query performance prediction");
    qpp_cmd->require_subcommand(1);

    auto* qpp_predict = qpp_cmd->add_subcommand("predict", "per-query predictor values");
    std::string qp_index, qp_queries, qp_output, qp_manifest;
    qpp_predict->add_option("--index", qp_index, "index path")->required();
    qpp_predict->add_option("--queries", qp_queries, "qid<TAB>text queries")->required();
    qpp_predict->add_option("--output", qp_output, "predictor table TSV")->required();
    qpp_predict->add_option("--manifest", qp_manifest, "manifest path override");
    qpp_predict->callback(guard(
        [&] { return cmd_qpp_predict(qp_index, qp_queries, qp_output, qp_manifest); }));

    auto* qpp_correlate = qpp_cmd->add_subcommand("correlate", "predictor/effectiveness table");
    std::string qc_index, qc_queries, qc_run, qc_qrels, qc_output, qc_json, qc_manifest;
    std::size_t qc_permutations = 10000;
    qpp_correlate->add_option("--index", qc_index, "index path")->required();
    qpp_correlate->add_option("--queries", qc_queries, "qid<TAB>text queries")->required();
    qpp_correlate->add_option("--run", qc_run, "TREC run file")->required();
    qpp_correlate->add_option("--qrels", qc_qrels, "TREC qrels file")->required();
    qpp_correlate->add_option("--output", qc_output, "correlation table TSV")->required();
    qpp_correlate->add_option("--json", qc_json, "JSON summary output");
    qpp_correlate->add_option("--permutations", qc_permutations, "permutation test samples");
    qpp_correlate->add_option("--manifest", qc_manifest, "manifest path override");
    qpp_correlate->callback(guard([&] {
        return cmd_qpp_correlate(qc_index, qc_queries, qc_run, qc_qrels, qc_output, qc_json,
                                 qc_permutations, seed, qc_manifest);
    }));

    // ---- sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "lambda x theta grid search");
    std::string sw_index, sw_queries, sw_qrels, sw_template, sw_output, sw_model = "dph",
                sw_metric = "ndcg@10", sw_manifest;
    std::string sw_lambdas = "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::string sw_thetas = "0.0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::size_t sw_k = 1000;
    bool sw_qe = false;
    sweep_cmd->add_option("--index", sw_index, "index path")->required();
    sweep_cmd->add_option("--queries", sw_queries, "validation queries TSV")->required();
    sweep_cmd->add_option("--qrels", sw_qrels, "qrels for the validation queries")->required();
    sweep_cmd
        ->add_option("--reformulations-template", sw_template,
                     "reformulations path, {lambda} substituted per cell")
        ->required();
    sweep_cmd->add_option("--lambdas", sw_lambdas, "comma list of lambda values");
    sweep_cmd->add_option("--thetas", sw_thetas, "comma list of theta values");
    sweep_cmd->add_option("--output", sw_output, "grid TSV output")->required();
    sweep_cmd->add_option("--model", sw_model, "dph or bm25");
    sweep_cmd->add_option("--metric", sw_metric, "objective metric");
    sweep_cmd->add_option("--k", sw_k, "retrieval depth");
    sweep_cmd->add_flag("--qe", sw_qe, "apply Bo1 expansion in each cell");
    sweep_cmd->add_option("--manifest", sw_manifest, "manifest path override");
    sweep_cmd->callback(guard([&] {
        return cmd_sweep(sw_index, sw_queries, sw_qrels, sw_template, sw_lambdas, sw_thetas,
                         sw_output, sw_model, sw_metric, sw_k, sw_qe, sw_manifest);
    }));

    // ---- report histogram
    auto* report_cmd = app.add_subcommand("report", "analysis reports");
    report_cmd->require_subcommand(1);
    auto* report_hist = report_cmd->add_subcommand("histogram", "improved/degraded/unchanged");
    std::string rh_baseline, rh_treatment, rh_qrels, rh_metric = "ndcg@10", rh_output, rh_manifest;
    double rh_epsilon = 1e-6;
    report_hist->add_option("--baseline", rh_baseline, "baseline run")->required();
    report_hist->add_option("--treatment", rh_treatment, "treatment run")->required();
    report_hist->add_option("--qrels", rh_qrels, "qrels file")->required();
    report_hist->add_option("--metric", rh_metric, "metric (map or ndcg@K)");
    report_hist->add_option("--epsilon", rh_epsilon, "unchanged threshold");
    report_hist->add_option("--output", rh_output, "JSON report output")->required();
    report_hist->add_option("--manifest", rh_manifest, "manifest path override");
    report_hist->callback(guard([&] {
        return cmd_report_histogram(rh_baseline, rh_treatment, rh_qrels, rh_metric, rh_epsilon,
                                    rh_output, rh_manifest);
    }));

    CLI11_PARSE(app, argc, argv);
    return exit_code;
}
