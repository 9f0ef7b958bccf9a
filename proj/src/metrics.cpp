#include "trajalign/metrics.hpp"

#include <map>
#include <set>

#include "trajalign/errors.hpp"

namespace trajalign {

std::vector<StepPair> step_pairs(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred) {
    const auto& gcalls = gt.flat_calls();
    const auto& pcalls = pred.flat_calls();
    std::vector<StepPair> out;
    out.reserve(matches.size());
    for (const auto& m : matches.matches) {
        if (m.gt_index >= gcalls.size() || m.pred_index >= pcalls.size()) {
            throw IndexError("match (" + std::to_string(m.gt_index) + "," + std::to_string(m.pred_index) +
                             ") does not resolve to a call");
        }
        out.push_back({gcalls[m.gt_index].step_index, pcalls[m.pred_index].step_index, m.similarity});
    }
    return out;
}

RecallPrecision recall_precision(const std::vector<SampleCounts>& samples) {
    if (samples.empty()) {
        throw EmptyCorpusError("recall/precision over an empty corpus");
    }
    std::size_t matched = 0;
    std::size_t gt = 0;
    std::size_t pred = 0;
    for (const auto& s : samples) {
        matched += s.n_matched;
        gt += s.n_gt;
        pred += s.n_pred;
    }
    if (gt == 0) {
        throw EmptyCorpusError("corpus holds no reference calls");
    }
    RecallPrecision rp;
    rp.recall = static_cast<double>(matched) / static_cast<double>(gt);
    rp.precision = pred == 0 ? 0.0 : static_cast<double>(matched) / static_cast<double>(pred);
    return rp;
}

std::optional<double> arg_similarity(const MatchSet& matches, double tau_strong) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& m : matches.matches) {
        if (m.similarity >= tau_strong) {
            sum += m.similarity;
            ++count;
        }
    }
    if (count == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(count);
}

StepCoherenceDetail step_coherence_detail(const std::vector<StepPair>& pairs) {
    std::map<std::size_t, std::set<std::size_t>> touched;
    std::map<std::size_t, std::size_t> weight;
    for (const auto& p : pairs) {
        touched[p.gt_step].insert(p.pred_step);
        ++weight[p.gt_step];
    }
    StepCoherenceDetail d;
    double num = 0.0;
    double den = 0.0;
    for (const auto& [step, preds] : touched) {
        const double w = static_cast<double>(weight[step]);
        const double sc = preds.size() <= 1 ? 1.0 : 1.0 / static_cast<double>(preds.size());
        num += w * sc;
        den += w;
        d.touched.emplace_back(step, std::vector<std::size_t>(preds.begin(), preds.end()));
    }
    d.value = den > 0.0 ? num / den : 0.0;
    return d;
}

double step_coherence(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred) {
    return step_coherence_detail(step_pairs(matches, gt, pred)).value;
}

Eigen::MatrixXd alignment_weights(const std::vector<StepPair>& pairs, std::size_t gt_steps, std::size_t pred_steps) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gt_steps), static_cast<Eigen::Index>(pred_steps));
    for (const auto& p : pairs) {
        w(static_cast<Eigen::Index>(p.gt_step), static_cast<Eigen::Index>(p.pred_step)) += p.similarity;
    }
    return w;
}

double merge_purity(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred) {
    const auto w = alignment_weights(step_pairs(matches, gt, pred), gt.step_count(), pred.step_count());
    return merge_purity_from_weights(w).value;
}

namespace {

/// Fenwick tree over step indices.
class CountTree {
public:
    explicit CountTree(std::size_t n) : tree_(n + 1, 0) {}

    void add(std::size_t i) {
        for (++i; i < tree_.size(); i += i & (~i + 1)) {
            ++tree_[i];
        }
    }

    /// number of inserted values <= i
    std::size_t prefix(std::size_t i) const {
        std::size_t s = 0;
        for (++i; i > 0; i -= i & (~i + 1)) {
            s += tree_[i];
        }
        return s;
    }

private:
    std::vector<std::size_t> tree_;
};

std::size_t choose2(std::size_t n) {
    return n * (n - (n > 0 ? 1 : 0)) / 2;
}

}  // namespace

OrderConsistencyDetail order_consistency_detail(const std::vector<StepPair>& pairs) {
    OrderConsistencyDetail d;
    const std::size_t n = pairs.size();
    if (n < 2) {
        return d;
    }

    // Q = all pairs - pairs tied on a - pairs tied on b + pairs tied on both
    std::map<std::size_t, std::size_t> by_a;
    std::map<std::size_t, std::size_t> by_b;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> by_ab;
    std::size_t max_b = 0;
    for (const auto& p : pairs) {
        ++by_a[p.gt_step];
        ++by_b[p.pred_step];
        ++by_ab[{p.gt_step, p.pred_step}];
        max_b = std::max(max_b, p.pred_step);
    }
    std::size_t q = choose2(n);
    for (const auto& [k, c] : by_a) {
        q -= choose2(c);
    }
    for (const auto& [k, c] : by_b) {
        q -= choose2(c);
    }
    for (const auto& [k, c] : by_ab) {
        q += choose2(c);
    }

    // Discordant pairs: a strictly increasing while b strictly decreases.
    // Sweep groups of equal a in order; before inserting a group, each
    // member counts earlier members with a larger b.
    std::vector<StepPair> sorted = pairs;
    std::sort(sorted.begin(), sorted.end(), [](const StepPair& x, const StepPair& y) {
        return x.gt_step < y.gt_step || (x.gt_step == y.gt_step && x.pred_step < y.pred_step);
    });
    CountTree tree(max_b + 1);
    std::size_t inserted = 0;
    std::size_t inversions = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && sorted[j].gt_step == sorted[i].gt_step) {
            inversions += inserted - tree.prefix(sorted[j].pred_step);
            ++j;
        }
        for (std::size_t k = i; k < j; ++k) {
            tree.add(sorted[k].pred_step);
            ++inserted;
        }
        i = j;
    }

    d.comparable_pairs = q;
    d.inversions = inversions;
    d.value = q == 0 ? 1.0 : 1.0 - static_cast<double>(inversions) / static_cast<double>(q);
    return d;
}

double order_consistency(const MatchSet& matches, const Trajectory& gt, const Trajectory& pred) {
    return order_consistency_detail(step_pairs(matches, gt, pred)).value;
}

double recall_covered(const std::vector<CoveredTerm>& terms) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& t : terms) {
        num += static_cast<double>(t.n_gt) * t.recall * t.metric;
        den += static_cast<double>(t.n_gt);
    }
    if (terms.empty() || den == 0.0) {
        throw EmptyCorpusError("recall-covered aggregate over an empty corpus");
    }
    return num / den;
}

SampleReport measure_sample(const Trajectory& gt,
                            const Trajectory& pred,
                            const MatchSet& matches,
                            double tau_strong,
                            std::string sample_id) {
    SampleReport r;
    r.sample_id = std::move(sample_id);
    r.n_gt = gt.call_count();
    r.n_pred = pred.call_count();
    if (r.n_gt == 0) {
        throw InvariantError("reference trajectory has no calls");
    }
    r.matches = matches;
    r.n_matched = matches.size();
    r.recall = static_cast<double>(r.n_matched) / static_cast<double>(r.n_gt);
    r.precision = r.n_pred == 0 ? 0.0 : static_cast<double>(r.n_matched) / static_cast<double>(r.n_pred);

    r.arg_sim = arg_similarity(matches, tau_strong);
    for (const auto& m : matches.matches) {
        if (m.similarity >= tau_strong) {
            ++r.strong_matches;
            r.strong_similarity_sum += m.similarity;
        }
    }

    r.pairs = step_pairs(matches, gt, pred);
    r.weights = alignment_weights(r.pairs, gt.step_count(), pred.step_count());
    r.step_coh_detail = step_coherence_detail(r.pairs);
    r.merge_pur_detail = merge_purity_from_weights(r.weights);
    r.ord_cons_detail = order_consistency_detail(r.pairs);

    if (matches.empty()) {
        // nothing aligned: structure cannot be credited
        r.step_coh = r.merge_pur = r.ord_cons = 0.0;
    } else {
        r.step_coh = r.step_coh_detail.value;
        r.merge_pur = r.merge_pur_detail.value;
        r.ord_cons = r.ord_cons_detail.value;
    }
    if (!r.arg_sim) {
        r.warnings.push_back("no match reaches tau_strong; arg_sim undefined");
    }
    return r;
}

SampleReport score_sample(const Trajectory& gt,
                          const Trajectory& pred,
                          const AlignmentConfig& cfg,
                          EncoderPort& encoder,
                          const SerializationPolicy& policy,
                          std::string sample_id) {
    cfg.validate();
    if (gt.call_count() == 0) {
        throw InvariantError((sample_id.empty() ? "" : sample_id + ": ") + "reference trajectory has no calls");
    }
    return with_context(sample_id.empty() ? "" : sample_id + ": ", [&] {
        const auto sim = similarity_matrix(gt.flat_calls(), pred.flat_calls(), encoder, policy);
        const auto matches = align(gt.flat_calls(), pred.flat_calls(), sim, cfg);
        SampleReport r = measure_sample(gt, pred, matches, cfg.tau_strong, sample_id);
        r.warnings.insert(r.warnings.begin(), sim.warnings.begin(), sim.warnings.end());
        return r;
    });
}

void validate_weights(const MetricWeights& w) {
    double sum = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw ConfigError("metric weights must be finite and non-negative");
        }
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("metric weights must sum to 1 (got " + std::to_string(sum) + ")");
    }
}

std::array<std::optional<double>, kMetricCount> CorpusReport::values() const {
    return {recall, precision, arg_sim, step_coh, ord_cons, merge_pur, task_comp, info_grnd};
}

double weighted_average(const std::array<std::optional<double>, kMetricCount>& values, const MetricWeights& weights) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < kMetricCount; ++k) {
        if (values[k]) {
            num += weights[k] * *values[k];
            den += weights[k];
        }
    }
    return den > 0.0 ? num / den : 0.0;
}

CorpusReport aggregate(std::vector<SampleReport> samples, const JudgeSummary& judges, const MetricWeights& weights) {
    if (samples.empty()) {
        throw EmptyCorpusError("aggregate over an empty corpus");
    }
    validate_weights(weights);
    std::stable_sort(samples.begin(), samples.end(),
                     [](const SampleReport& a, const SampleReport& b) { return a.sample_id < b.sample_id; });

    CorpusReport c;
    c.weights = weights;

    std::vector<SampleCounts> counts;
    std::vector<CoveredTerm> sc;
    std::vector<CoveredTerm> mp;
    std::vector<CoveredTerm> oc;
    std::size_t strong = 0;
    double strong_sum = 0.0;
    for (const auto& s : samples) {
        counts.push_back({s.n_matched, s.n_gt, s.n_pred});
        sc.push_back({s.step_coh, s.recall, s.n_gt});
        mp.push_back({s.merge_pur, s.recall, s.n_gt});
        oc.push_back({s.ord_cons, s.recall, s.n_gt});
        strong += s.strong_matches;
        strong_sum += s.strong_similarity_sum;
    }
    const auto rp = recall_precision(counts);
    c.recall = rp.recall;
    c.precision = rp.precision;
    c.arg_sim_defined = strong > 0;
    c.arg_sim = strong > 0 ? strong_sum / static_cast<double>(strong) : 0.0;
    c.step_coh = recall_covered(sc);
    c.merge_pur = recall_covered(mp);
    c.ord_cons = recall_covered(oc);
    c.task_comp = judges.task_comp;
    c.info_grnd = judges.info_grnd;
    c.judge_failures = judges.judge_failures;
    c.average_score = weighted_average(c.values(), weights);
    c.samples = std::move(samples);
    return c;
}

}  // namespace trajalign
