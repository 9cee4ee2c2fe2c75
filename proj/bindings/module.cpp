#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "drqr/eval.hpp"
#include "drqr/index.hpp"
#include "drqr/mining.hpp"
#include "drqr/porter.hpp"
#include "drqr/qpp.hpp"
#include "drqr/ranking.hpp"
#include "drqr/rl.hpp"
#include "drqr/seq2seq.hpp"
#include "drqr/text_pipeline.hpp"

namespace py = pybind11;
using namespace drqr;

namespace {

CorrelationKind parse_correlation(const std::string& name) {
    if (name == "spearman") return CorrelationKind::Spearman;
    if (name == "kendall") return CorrelationKind::Kendall;
    throw std::invalid_argument("unknown correlation kind: " + name);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "query reformulation pipeline: indexing, ranking, QPP, seq2seq, RL";

    // ---- text pipeline
    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def(py::init<>())
        .def_readwrite("lowercase", &PipelineConfig::lowercase)
        .def_readwrite("stem", &PipelineConfig::stem)
        .def_property(
            "stopwords",
            [](const PipelineConfig& c) {
                return std::vector<std::string>(c.stopwords.begin(), c.stopwords.end());
            },
            [](PipelineConfig& c, const std::vector<std::string>& words) {
                c.stopwords.clear();
                c.stopwords.insert(words.begin(), words.end());
            });
    m.def("tokenize", [](const std::string& text, bool lowercase) {
        return tokenize(text, lowercase);
    }, py::arg("text"), py::arg("lowercase") = true);
    m.def("process", [](const std::string& text, const PipelineConfig& config) {
        return process(text, config);
    });
    m.def("porter_stem", &porter_stem);
    m.def("load_stopwords", [](const std::filesystem::path& path) {
        auto words = load_stopwords(path);
        return std::vector<std::string>(words.begin(), words.end());
    });

    // ---- index
    py::class_<TermStats>(m, "TermStats")
        .def_readonly("doc_frequency", &TermStats::doc_frequency)
        .def_readonly("collection_frequency", &TermStats::collection_frequency);
    py::class_<CollectionStats>(m, "CollectionStats")
        .def_property_readonly("num_docs", &CollectionStats::num_docs)
        .def_property_readonly("total_terms", &CollectionStats::total_terms)
        .def_property_readonly("average_doc_length", &CollectionStats::average_doc_length)
        .def("term", &CollectionStats::term);
    py::class_<InvertedIndex>(m, "InvertedIndex")
        .def_static("build", &InvertedIndex::build, py::arg("docs"), py::arg("config"))
        .def_static("load", &InvertedIndex::load)
        .def("save", &InvertedIndex::save)
        .def_property_readonly("stats", &InvertedIndex::stats,
                               py::return_value_policy::reference_internal)
        .def_property_readonly("pipeline", &InvertedIndex::pipeline,
                               py::return_value_policy::reference_internal)
        .def("term_statistics", &InvertedIndex::term_statistics)
        .def("doc_count", &InvertedIndex::doc_count);

    // ---- qpp
    py::enum_<PredictorKind>(m, "PredictorKind")
        .value("AvgIDF", PredictorKind::AvgIdf)
        .value("AvgICTF", PredictorKind::AvgIctf)
        .value("SCS", PredictorKind::Scs)
        .value("AvgSCQ", PredictorKind::AvgScq)
        .value("MaxSCQ", PredictorKind::MaxScq)
        .value("SumSCQ", PredictorKind::SumScq)
        .value("QueryLength", PredictorKind::QueryLength);
    py::class_<QppScore>(m, "QppScore")
        .def_readonly("kind", &QppScore::kind)
        .def_readonly("value", &QppScore::value)
        .def_readonly("num_scored_terms", &QppScore::num_scored_terms);
    py::class_<Calibration>(m, "Calibration")
        .def(py::init<double, double>(), py::arg("min"), py::arg("max"))
        .def_readwrite("min", &Calibration::min)
        .def_readwrite("max", &Calibration::max);
    m.def("predict", [](const CollectionStats& stats, const std::vector<std::string>& query,
                        PredictorKind kind) { return predict(stats, query, kind); });
    m.def("normalize_score", &normalize_score);
    m.def("calibrate", &calibrate);
    m.def("parse_predictor", &parse_predictor);
    m.def("predictor_name", &predictor_name);

    // ---- ranking
    py::enum_<RankingModel>(m, "RankingModel")
        .value("DPH", RankingModel::Dph)
        .value("BM25", RankingModel::Bm25);
    py::class_<WeightedQuery>(m, "WeightedQuery")
        .def(py::init<>())
        .def(py::init([](const std::string& qid,
                         const std::vector<std::pair<std::string, double>>& terms) {
            return WeightedQuery{qid, terms};
        }))
        .def_static(
            "from_terms",
            [](const std::string& qid, const std::vector<std::string>& terms, double weight) {
                return WeightedQuery::from_terms(qid, terms, weight);
            },
            py::arg("qid"), py::arg("terms"), py::arg("weight") = 1.0)
        .def_readwrite("qid", &WeightedQuery::qid)
        .def_readwrite("terms", &WeightedQuery::terms)
        .def("canonical", &WeightedQuery::canonical)
        .def("weight", &WeightedQuery::weight);
    py::class_<RankedEntry>(m, "RankedEntry")
        .def_readonly("docno", &RankedEntry::docno)
        .def_readonly("score", &RankedEntry::score);
    py::class_<RankedList>(m, "RankedList")
        .def(py::init<>())
        .def_readwrite("qid", &RankedList::qid)
        .def_readwrite("tag", &RankedList::tag)
        .def_readonly("entries", &RankedList::entries);
    m.def("retrieve",
          [](RankingModel model, const InvertedIndex& index, const WeightedQuery& query,
             std::size_t k, const std::string& tag) {
              return retrieve(model, index, query, k, tag);
          },
          py::arg("model"), py::arg("index"), py::arg("query"), py::arg("k") = 1000,
          py::arg("tag") = "run");
    m.def("bo1_expand",
          [](const InvertedIndex& index, const WeightedQuery& query, const RankedList& initial,
             std::size_t num_docs, std::size_t num_terms) {
              return bo1_expand(index, query, initial, num_docs, num_terms);
          },
          py::arg("index"), py::arg("query"), py::arg("initial"), py::arg("num_docs") = 3,
          py::arg("num_terms") = 10);
    m.def("mix_queries", &mix_queries);
    m.def("write_trec_run", [](const std::filesystem::path& path,
                               const std::vector<RankedList>& runs) {
        write_trec_run(path, runs);
    });
    m.def("read_trec_run", &read_trec_run);

    // ---- mining
    py::class_<Qrels>(m, "Qrels")
        .def(py::init<>())
        .def("add", &Qrels::add)
        .def("grade", &Qrels::grade)
        .def("num_relevant", &Qrels::num_relevant)
        .def_static("read_trec", &Qrels::read_trec)
        .def("write_trec", &Qrels::write_trec);
    py::class_<QueryPair>(m, "QueryPair")
        .def(py::init([](std::string src_qid, std::string tgt_qid, std::string src_text,
                         std::string tgt_text) {
            return QueryPair{std::move(src_qid), std::move(tgt_qid), std::move(src_text),
                             std::move(tgt_text)};
        }))
        .def_readwrite("src_qid", &QueryPair::src_qid)
        .def_readwrite("tgt_qid", &QueryPair::tgt_qid)
        .def_readwrite("src_text", &QueryPair::src_text)
        .def_readwrite("tgt_text", &QueryPair::tgt_text);
    m.def("mine_pairs",
          [](const Qrels& qrels, const std::map<std::string, std::string>& queries) {
              MiningReport report;
              auto pairs = mine_pairs(qrels, queries, &report);
              return py::make_tuple(pairs, report.ordered_pairs, report.unordered_pairs,
                                    report.missing_qids);
          });
    m.def("split_pairs", &split_pairs);

    // ---- eval
    m.def("average_precision", &average_precision, py::arg("ranking"), py::arg("qrels"),
          py::arg("cutoff") = 1000);
    m.def("ndcg_at_k", &ndcg_at_k, py::arg("ranking"), py::arg("qrels"), py::arg("k") = 10);
    m.def("rank_correlation",
          [](const std::vector<double>& xs, const std::vector<double>& ys,
             const std::string& kind) { return rank_correlation(xs, ys, parse_correlation(kind)); });
    m.def("permutation_significance",
          [](const std::vector<double>& xs, const std::vector<double>& ys,
             const std::string& kind, std::size_t num_permutations, std::uint64_t seed) {
              return permutation_significance(xs, ys, parse_correlation(kind), num_permutations,
                                              seed);
          },
          py::arg("xs"), py::arg("ys"), py::arg("kind"), py::arg("num_permutations") = 10000,
          py::arg("seed") = 1);
    m.def("fisher_z_compare", &fisher_z_compare);
    py::class_<TTestResult>(m, "TTestResult")
        .def_readonly("p", &TTestResult::p)
        .def_readonly("t", &TTestResult::t)
        .def_readonly("all_zero", &TTestResult::all_zero)
        .def_readonly("zero_variance", &TTestResult::zero_variance);
    m.def("paired_t_test", [](const std::vector<double>& as, const std::vector<double>& bs) {
        return paired_t_test(as, bs);
    });
    py::class_<DeltaHistogram>(m, "DeltaHistogram")
        .def_readonly("improved", &DeltaHistogram::improved)
        .def_readonly("degraded", &DeltaHistogram::degraded)
        .def_readonly("unchanged", &DeltaHistogram::unchanged);
    m.def("delta_histogram", &delta_histogram);

    // ---- seq2seq + rl
    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("emb_dim", &ModelConfig::emb_dim)
        .def_readwrite("hidden_dim", &ModelConfig::hidden_dim)
        .def_readwrite("max_len", &ModelConfig::max_len)
        .def_readwrite("dropout", &ModelConfig::dropout);
    py::class_<Vocabulary>(m, "Vocabulary")
        .def_static("build",
                    [](const std::vector<QueryPair>& pairs, std::size_t min_frequency) {
                        return Vocabulary::build(pairs, min_frequency);
                    },
                    py::arg("pairs"), py::arg("min_frequency") = 1)
        .def("id", &Vocabulary::id)
        .def("token", &Vocabulary::token)
        .def("size", &Vocabulary::size)
        .def_property_readonly("tokens", &Vocabulary::tokens);
    py::class_<ModelParameters>(m, "ModelParameters")
        .def_static("init", &ModelParameters::init, py::arg("config"), py::arg("vocab_size"),
                    py::arg("seed"))
        .def_property_readonly("vocab_size",
                               [](const ModelParameters& p) { return p.vocab_size; })
        .def_property_readonly("config", [](const ModelParameters& p) { return p.config; });
    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("max_epochs", &TrainConfig::max_epochs)
        .def_readwrite("patience", &TrainConfig::patience)
        .def_readwrite("grad_clip", &TrainConfig::grad_clip)
        .def_readwrite("dropout", &TrainConfig::dropout)
        .def_readwrite("seed", &TrainConfig::seed);
    py::class_<EpochLoss>(m, "EpochLoss")
        .def_readonly("train", &EpochLoss::train)
        .def_readonly("valid", &EpochLoss::valid);
    py::class_<MlTrainResult>(m, "MlTrainResult")
        .def_readonly("history", &MlTrainResult::history)
        .def_readonly("best_epoch", &MlTrainResult::best_epoch);
    m.def("train_ml",
          [](ModelParameters& params, const Vocabulary& vocab,
             const std::vector<QueryPair>& train_pairs, const std::vector<QueryPair>& valid_pairs,
             const TrainConfig& config) {
              return train_ml(params, vocab, train_pairs, valid_pairs, config);
          });
    m.def("greedy_decode",
          [](ModelParameters& params, const Vocabulary& vocab,
             const std::vector<std::string>& source, int max_len) {
              return greedy_decode(params, vocab, source, max_len);
          },
          py::arg("params"), py::arg("vocab"), py::arg("source"), py::arg("max_len") = 20);
    m.def("save_checkpoint", &save_checkpoint);
    m.def("load_checkpoint", &load_checkpoint);

    py::class_<RewardConfig>(m, "RewardConfig")
        .def(py::init<>())
        .def_readwrite("lambda_", &RewardConfig::lambda)
        .def_readwrite("predictor", &RewardConfig::predictor)
        .def_readwrite("calibration", &RewardConfig::calibration);
    m.def("dedup_penalize", [](const std::vector<std::string>& tokens) {
        return dedup_penalize(tokens);
    });
    m.def("f1_reward", [](const std::vector<std::string>& predicted,
                          const std::vector<std::string>& truth) {
        return f1_reward(predicted, truth);
    });
    m.def("qpp_reward", [](const std::vector<std::string>& predicted,
                           const CollectionStats& stats, const RewardConfig& config) {
        return qpp_reward(predicted, stats, config);
    });
    m.def("combined_reward",
          [](const std::vector<std::string>& predicted, const std::vector<std::string>& truth,
             const CollectionStats& stats, const RewardConfig& config) {
              return combined_reward(predicted, truth, stats, config);
          });
    py::class_<TrainingSchedule>(m, "TrainingSchedule")
        .def(py::init<>())
        .def_readwrite("n_ml_epochs", &TrainingSchedule::n_ml_epochs)
        .def_readwrite("n_rl_epochs", &TrainingSchedule::n_rl_epochs)
        .def_readwrite("rl_learning_rate", &TrainingSchedule::rl_learning_rate)
        .def_readwrite("rl_batch_size", &TrainingSchedule::rl_batch_size)
        .def_readwrite("patience", &TrainingSchedule::patience)
        .def_readwrite("grad_clip", &TrainingSchedule::grad_clip);
    py::class_<RlEpochStats>(m, "RlEpochStats")
        .def_readonly("mean_sample_reward", &RlEpochStats::mean_sample_reward)
        .def_readonly("mean_baseline_reward", &RlEpochStats::mean_baseline_reward)
        .def_readonly("mean_advantage", &RlEpochStats::mean_advantage)
        .def_readonly("valid_reward", &RlEpochStats::valid_reward);
    py::class_<RlTrainResult>(m, "RlTrainResult")
        .def_readonly("history", &RlTrainResult::history)
        .def_readonly("best_epoch", &RlTrainResult::best_epoch);
    m.def("train_drqr",
          [](ModelParameters& params, const Vocabulary& vocab,
             const std::vector<QueryPair>& train_pairs, const std::vector<QueryPair>& valid_pairs,
             const CollectionStats& stats, const RewardConfig& config,
             const TrainingSchedule& schedule, std::uint64_t seed) {
              return train_drqr(params, vocab, train_pairs, valid_pairs, stats, config, schedule,
                                seed);
          });
}
