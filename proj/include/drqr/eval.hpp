#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drqr/mining.hpp"
#include "drqr/qpp.hpp"
#include "drqr/ranking.hpp"

namespace drqr {

/// AP over the top `cutoff` entries; 0 (flagged upstream) when the query has
/// no relevant documents.
double average_precision(const RankedList& ranking, const Qrels& qrels, std::size_t cutoff = 1000);

/// NDCG@k with gain 2^grade - 1 and discount 1/log2(rank + 1).
double ndcg_at_k(const RankedList& ranking, const Qrels& qrels, std::size_t k = 10);

enum class CorrelationKind { Spearman, Kendall };

/// Spearman = Pearson of average ranks; Kendall = tau-b. Throws on length
/// mismatch, n < 2, or constant input.
double rank_correlation(std::span<const double> xs, std::span<const double> ys,
                        CorrelationKind kind);

/// Exact two-sided permutation p-value; requires n <= 8.
double exact_permutation_pvalue(std::span<const double> xs, std::span<const double> ys,
                                CorrelationKind kind);

/// Monte-Carlo two-sided p-value, p = (1 + hits) / (1 + num_permutations).
double sampled_permutation_pvalue(std::span<const double> xs, std::span<const double> ys,
                                  CorrelationKind kind, std::size_t num_permutations,
                                  std::uint64_t seed);

/// Exact enumeration for n <= 8, sampled otherwise.
double permutation_significance(std::span<const double> xs, std::span<const double> ys,
                                CorrelationKind kind, std::size_t num_permutations = 10000,
                                std::uint64_t seed = 1);

/// Two-sided p for the difference of two correlations via the Fisher-z
/// transform, treating the samples as independent (flagged in reports: the
/// compared query sets usually overlap).
double fisher_z_compare(double r1, std::size_t n1, double r2, std::size_t n2);

struct TTestResult {
    double p = 1.0;
    double t = 0.0;
    bool all_zero = false;       // every per-query difference is zero
    bool zero_variance = false;  // nonzero mean, zero variance
};

/// Two-sided paired t-test on per-query differences, n-1 dof.
TTestResult paired_t_test(std::span<const double> as, std::span<const double> bs);

struct DeltaHistogram {
    std::size_t improved = 0;
    std::size_t degraded = 0;
    std::size_t unchanged = 0;
};

/// Classifies per-query metric deltas (treatment - baseline) against epsilon.
DeltaHistogram delta_histogram(const std::map<std::string, double>& baseline,
                               const std::map<std::string, double>& treatment, double epsilon);

struct CorrelationReport {
    PredictorKind predictor;
    std::string metric;
    double spearman_rho = 0.0;
    double kendall_tau = 0.0;
    double p_spearman = 1.0;
    double p_kendall = 1.0;
    std::size_t n = 0;
};

}  // namespace drqr
