#include "drqr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "drqr/common.hpp"

namespace drqr {

double average_precision(const RankedList& ranking, const Qrels& qrels, std::size_t cutoff) {
    std::size_t num_relevant = qrels.num_relevant(ranking.qid);
    if (num_relevant == 0) return 0.0;
    double ap = 0.0;
    std::size_t hits = 0;
    std::size_t rank = 0;
    for (const auto& entry : ranking.entries) {
        if (++rank > cutoff) break;
        if (qrels.grade(ranking.qid, entry.docno) >= 1) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(rank);
        }
    }
    return ap / static_cast<double>(num_relevant);
}

double ndcg_at_k(const RankedList& ranking, const Qrels& qrels, std::size_t k) {
    auto it = qrels.by_qid().find(ranking.qid);
    if (it == qrels.by_qid().end()) return 0.0;

    std::vector<int> grades;
    for (const auto& [docno, grade] : it->second) grades.push_back(grade);
    std::sort(grades.rbegin(), grades.rend());

    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
        ideal += (std::pow(2.0, grades[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    if (ideal == 0.0) return 0.0;

    double dcg = 0.0;
    for (std::size_t i = 0; i < std::min(k, ranking.entries.size()); ++i) {
        int grade = qrels.grade(ranking.qid, ranking.entries[i].docno);
        dcg += (std::pow(2.0, grade) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    }
    return dcg / ideal;
}

namespace {

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    const double n = static_cast<double>(xs.size());
    double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double dx = xs[i] - mx;
        double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("correlation undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

// tau-b; integer pair counts so that identical orderings give exactly 1.0
double kendall_tau_b(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = xs.size();
    long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0, ties_both = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = xs[i] - xs[j];
            double dy = ys[i] - ys[j];
            if (dx == 0.0 && dy == 0.0)
                ++ties_both;
            else if (dx == 0.0)
                ++ties_x;
            else if (dy == 0.0)
                ++ties_y;
            else if ((dx > 0.0) == (dy > 0.0))
                ++concordant;
            else
                ++discordant;
        }
    }
    long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    long long nx = n0 - ties_x - ties_both;
    long long ny = n0 - ties_y - ties_both;
    if (nx == 0 || ny == 0)
        throw std::invalid_argument("correlation undefined for constant input");
    return static_cast<double>(concordant - discordant) /
           std::sqrt(static_cast<double>(nx) * static_cast<double>(ny));
}

}  // namespace

double rank_correlation(std::span<const double> xs, std::span<const double> ys,
                        CorrelationKind kind) {
    if (xs.size() != ys.size()) throw std::invalid_argument("correlation length mismatch");
    if (xs.size() < 2) throw std::invalid_argument("correlation needs at least 2 points");
    if (kind == CorrelationKind::Kendall) return kendall_tau_b(xs, ys);
    auto rx = average_ranks(xs);
    auto ry = average_ranks(ys);
    return pearson(rx, ry);
}

double exact_permutation_pvalue(std::span<const double> xs, std::span<const double> ys,
                                CorrelationKind kind) {
    const std::size_t n = xs.size();
    if (n > 8) throw std::invalid_argument("exact permutation test limited to n <= 8");
    double observed = std::abs(rank_correlation(xs, ys, kind));
    std::vector<double> perm(ys.begin(), ys.end());
    std::sort(perm.begin(), perm.end());
    std::size_t total = 0, hits = 0;
    do {
        ++total;
        if (std::abs(rank_correlation(xs, perm, kind)) >= observed - 1e-12) ++hits;
    } while (std::next_permutation(perm.begin(), perm.end()));
    // duplicate y values collapse permutations; the ratio is unchanged
    return static_cast<double>(hits) / static_cast<double>(total);
}

double sampled_permutation_pvalue(std::span<const double> xs, std::span<const double> ys,
                                  CorrelationKind kind, std::size_t num_permutations,
                                  std::uint64_t seed) {
    double observed = std::abs(rank_correlation(xs, ys, kind));
    std::mt19937_64 rng(seed);
    std::vector<double> perm(ys.begin(), ys.end());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < num_permutations; ++i) {
        deterministic_shuffle(perm, rng);
        if (std::abs(rank_correlation(xs, perm, kind)) >= observed - 1e-12) ++hits;
    }
    return static_cast<double>(1 + hits) / static_cast<double>(1 + num_permutations);
}

double permutation_significance(std::span<const double> xs, std::span<const double> ys,
                                CorrelationKind kind, std::size_t num_permutations,
                                std::uint64_t seed) {
    if (xs.size() <= 8) return exact_permutation_pvalue(xs, ys, kind);
    return sampled_permutation_pvalue(xs, ys, kind, num_permutations, seed);
}

double fisher_z_compare(double r1, std::size_t n1, double r2, std::size_t n2) {
    if (std::abs(r1) >= 1.0 || std::abs(r2) >= 1.0)
        throw std::invalid_argument("fisher_z_compare needs |r| < 1");
    if (n1 < 4 || n2 < 4) throw std::invalid_argument("fisher_z_compare needs n >= 4");
    double z1 = std::atanh(r1);
    double z2 = std::atanh(r2);
    double se = std::sqrt(1.0 / static_cast<double>(n1 - 3) + 1.0 / static_cast<double>(n2 - 3));
    double statistic = (z1 - z2) / se;
    // two-sided normal tail: 2 * (1 - Phi(|z|)) = erfc(|z| / sqrt(2))
    return std::erfc(std::abs(statistic) / std::sqrt(2.0));
}

TTestResult paired_t_test(std::span<const double> as, std::span<const double> bs) {
    if (as.size() != bs.size()) throw std::invalid_argument("paired t-test length mismatch");
    if (as.size() < 2) throw std::invalid_argument("paired t-test needs at least 2 points");
    const std::size_t n = as.size();
    std::vector<double> diffs(n);
    for (std::size_t i = 0; i < n; ++i) diffs[i] = as[i] - bs[i];

    double mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);

    TTestResult result;
    if (std::all_of(diffs.begin(), diffs.end(), [](double d) { return d == 0.0; })) {
        result.all_zero = true;
        result.p = 1.0;
        return result;
    }
    if (ss == 0.0) {
        result.zero_variance = true;
        result.p = 0.0;
        result.t = mean > 0.0 ? std::numeric_limits<double>::infinity()
                              : -std::numeric_limits<double>::infinity();
        return result;
    }
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    result.t = mean / (sd / std::sqrt(static_cast<double>(n)));
    boost::math::students_t dist(static_cast<double>(n - 1));
    result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t)));
    return result;
}

DeltaHistogram delta_histogram(const std::map<std::string, double>& baseline,
                               const std::map<std::string, double>& treatment, double epsilon) {
    if (baseline.size() != treatment.size())
        throw std::invalid_argument("delta_histogram qid sets differ");
    DeltaHistogram hist;
    for (const auto& [qid, base] : baseline) {
        auto it = treatment.find(qid);
        if (it == treatment.end())
            throw std::invalid_argument("delta_histogram missing qid in treatment: " + qid);
        double delta = it->second - base;
        if (std::abs(delta) <= epsilon)
            ++hist.unchanged;
        else if (delta > 0.0)
            ++hist.improved;
        else
            ++hist.degraded;
    }
    return hist;
}

}  // namespace drqr
