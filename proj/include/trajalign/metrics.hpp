#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "trajalign/alignment.hpp"
#include "trajalign/embedding.hpp"
#include "trajalign/serialization.hpp"
#include "trajalign/trajectory.hpp"

namespace trajalign {

/// Step-level view of a match: reference step, predicted step, similarity.
struct StepPair {
    std::size_t gt_step = 0;
    std::size_t pred_step = 0;
    double similarity = 0.0;
};

/// Resolve every match to the steps of its two calls.
std::vector<StepPair> step_pairs(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred);

// ---------------------------------------------------------------- detection

struct RecallPrecision {
    double recall = 0.0;
    double precision = 0.0;
};

struct SampleCounts {
    std::size_t n_matched = 0;
    std::size_t n_gt = 0;
    std::size_t n_pred = 0;
};

/// Micro-averaged recall and precision over samples. Precision is 0 when no
/// sample predicted anything. Throws EmptyCorpusError on an empty list or
/// when the samples hold no reference calls.
RecallPrecision recall_precision(const std::vector<SampleCounts>& samples);

// ------------------------------------------------------- argument similarity

/// Mean similarity of the matches at or above tau_strong; nullopt when none
/// clears it.
std::optional<double> arg_similarity(const MatchSet& matches, double tau_strong);

// ------------------------------------------------------------ step coherence

struct StepCoherenceDetail {
    double value = 0.0;
    /// predicted steps touched by each reference step that has matches
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> touched;
};

/// Match-count weighted mean of per-step coherence, where a reference step
/// whose matches land in k > 1 predicted steps scores 1/k. Zero when there
/// are no matches.
StepCoherenceDetail step_coherence_detail(const std::vector<StepPair>& pairs);
double step_coherence(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred);

// -------------------------------------------------------------- merge purity

struct MergePurityDetail {
    double value = 1.0;
    double conditional_entropy = 0.0;  ///< H(G|P), natural log
    std::size_t active_gt_steps = 0;   ///< G_act
    double total_mass = 0.0;
};

/// Purity from an alignment weight table W (rows: reference steps, cols:
/// predicted steps): 1 - H(G|P) / log G_act, and 1 when G_act <= 1 or the
/// table has no mass. Throws DomainError if the entropy leaves
/// [0, log G_act] by more than rounding slack.
template <typename Derived>
MergePurityDetail merge_purity_from_weights(const Eigen::MatrixBase<Derived>& weights);

/// W_ab = sum of similarities of matches from reference step a to predicted
/// step b.
Eigen::MatrixXd alignment_weights(const std::vector<StepPair>& pairs, std::size_t gt_steps, std::size_t pred_steps);

double merge_purity(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred);

// --------------------------------------------------------- order consistency

struct OrderConsistencyDetail {
    double value = 1.0;
    std::size_t comparable_pairs = 0;  ///< Q
    std::size_t inversions = 0;
};

/// 1 - inversions / Q over match pairs that differ on both step axes; 1 when
/// Q == 0. Runs in O(n log n) by counting concordant and tied pairs.
OrderConsistencyDetail order_consistency_detail(const std::vector<StepPair>& pairs);
double order_consistency(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred);

// ------------------------------------------------------------ recall-covered

struct CoveredTerm {
    double metric = 0.0;  ///< F_m
    double recall = 0.0;  ///< r_m
    std::size_t n_gt = 0;
};

/// sum(N_gt * r * F) / sum(N_gt). Throws EmptyCorpusError when the
/// denominator is zero.
double recall_covered(const std::vector<CoveredTerm>& terms);

// ------------------------------------------------------------------ reports

struct SampleReport {
    std::string sample_id;
    std::size_t n_gt = 0;
    std::size_t n_pred = 0;
    std::size_t n_matched = 0;
    double recall = 0.0;
    double precision = 0.0;
    std::optional<double> arg_sim;
    double step_coh = 0.0;
    double merge_pur = 0.0;
    double ord_cons = 0.0;

    // diagnostics
    MatchSet matches;
    std::vector<StepPair> pairs;
    std::size_t strong_matches = 0;
    double strong_similarity_sum = 0.0;
    StepCoherenceDetail step_coh_detail;
    MergePurityDetail merge_pur_detail;
    OrderConsistencyDetail ord_cons_detail;
    Eigen::MatrixXd weights;
    std::vector<std::string> warnings;
};

/// Full pipeline for one pair: serialise, embed, align, measure. With no
/// matches the three structural metrics are 0. Throws InvariantError when
/// the reference holds no calls.
SampleReport score_sample(const Trajectory& gt,
                          const Trajectory& pred,
                          const AlignmentConfig& cfg,
                          EncoderPort& encoder,
                          const SerializationPolicy& policy,
                          std::string sample_id = {});

/// Metrics of a match set that is already known (used by score_sample).
SampleReport measure_sample(const Trajectory& gt,
                            const Trajectory& pred,
                            const MatchSet& matches,
                            double tau_strong,
                            std::string sample_id = {});

/// Column order of the leaderboard.
enum class Metric : std::size_t {
    Recall = 0,
    Precision,
    ArgSim,
    StepCoh,
    OrdCons,
    MergePur,
    TaskComp,
    InfoGrnd,
};
inline constexpr std::size_t kMetricCount = 8;
inline constexpr std::array<const char*, kMetricCount> kMetricNames = {
    "recall", "precision", "arg_sim", "step_coh", "ord_cons", "merge_pur", "task_comp", "info_grnd"};

using MetricWeights = std::array<double, kMetricCount>;

inline MetricWeights uniform_weights() {
    MetricWeights w;
    w.fill(1.0 / static_cast<double>(kMetricCount));
    return w;
}

/// Throws ConfigError unless weights are non-negative and sum to 1 +- 1e-9.
void validate_weights(const MetricWeights& w);

/// Judge-derived corpus metrics, already aggregated.
struct JudgeSummary {
    std::optional<double> task_comp;
    std::optional<double> info_grnd;
    std::size_t judge_failures = 0;
};

struct CorpusReport {
    double recall = 0.0;
    double precision = 0.0;
    double arg_sim = 0.0;
    bool arg_sim_defined = false;
    double step_coh = 0.0;
    double ord_cons = 0.0;
    double merge_pur = 0.0;
    std::optional<double> task_comp;
    std::optional<double> info_grnd;
    double average_score = 0.0;
    std::size_t judge_failures = 0;
    MetricWeights weights = uniform_weights();
    std::vector<SampleReport> samples;

    /// Metric values in leaderboard order; absent judge metrics are nullopt.
    std::array<std::optional<double>, kMetricCount> values() const;
};

/// Corpus fold: micro recall/precision, pooled ArgSim, recall-covered
/// structural metrics, judge metrics passed through, and the weighted
/// average. Weights of absent judge metrics are dropped and the rest
/// renormalised. Samples are sorted by id, so input order never matters.
CorpusReport aggregate(std::vector<SampleReport> samples,
                       const JudgeSummary& judges = {},
                       const MetricWeights& weights = uniform_weights());

/// Weighted mean of the present values with renormalised weights; 0 when
/// every present value has zero weight.
double weighted_average(const std::array<std::optional<double>, kMetricCount>& values, const MetricWeights& weights);

// ---------------------------------------------------------------- template

template <typename Derived>
MergePurityDetail merge_purity_from_weights(const Eigen::MatrixBase<Derived>& weights) {
    MergePurityDetail d;
    const Eigen::Index rows = weights.rows();
    const Eigen::Index cols = weights.cols();
    d.total_mass = static_cast<double>(weights.sum());
    for (Eigen::Index a = 0; a < rows; ++a) {
        if (weights.row(a).sum() > 0) {
            ++d.active_gt_steps;
        }
    }
    if (d.active_gt_steps <= 1 || d.total_mass <= 0.0) {
        d.value = 1.0;
        return d;
    }
    double h = 0.0;
    for (Eigen::Index b = 0; b < cols; ++b) {
        const double col_mass = static_cast<double>(weights.col(b).sum());
        if (col_mass <= 0.0) {
            continue;
        }
        double hb = 0.0;
        for (Eigen::Index a = 0; a < rows; ++a) {
            const double w = static_cast<double>(weights(a, b));
            if (w > 0.0) {
                const double q = w / col_mass;
                hb -= q * std::log(q);
            }
        }
        h += (col_mass / d.total_mass) * hb;
    }
    const double log_g = std::log(static_cast<double>(d.active_gt_steps));
    constexpr double kSlack = 1e-12;
    if (h < -kSlack || h > log_g + kSlack) {
        throw DomainError("conditional entropy " + std::to_string(h) + " outside [0, log G_act=" +
                          std::to_string(log_g) + "]");
    }
    h = std::clamp(h, 0.0, log_g);
    d.conditional_entropy = h;
    d.value = std::clamp(1.0 - h / log_g, 0.0, 1.0);
    return d;
}

}  // namespace trajalign
