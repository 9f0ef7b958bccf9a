#include "trajalign/report.hpp"

#include <cstdio>

namespace trajalign {

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

nlohmann::json to_json(const SampleReport& r) {
    nlohmann::json matches = nlohmann::json::array();
    for (std::size_t k = 0; k < r.matches.matches.size(); ++k) {
        const auto& m = r.matches.matches[k];
        nlohmann::json entry = {{"gt_index", m.gt_index}, {"pred_index", m.pred_index}, {"similarity", m.similarity}};
        if (k < r.pairs.size()) {
            entry["gt_step"] = r.pairs[k].gt_step;
            entry["pred_step"] = r.pairs[k].pred_step;
        }
        matches.push_back(std::move(entry));
    }
    nlohmann::json touched = nlohmann::json::array();
    for (const auto& [gt_step, preds] : r.step_coh_detail.touched) {
        touched.push_back({{"gt_step", gt_step}, {"pred_steps", preds}});
    }
    nlohmann::json weights = nlohmann::json::array();
    for (Eigen::Index a = 0; a < r.weights.rows(); ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index b = 0; b < r.weights.cols(); ++b) {
            row.push_back(r.weights(a, b));
        }
        weights.push_back(std::move(row));
    }
    return {
        {"sample_id", r.sample_id},
        {"counts", {{"n_gt", r.n_gt}, {"n_pred", r.n_pred}, {"n_matched", r.n_matched}}},
        {"metrics",
         {{"recall", r.recall},
          {"precision", r.precision},
          {"arg_sim", optional_number(r.arg_sim)},
          {"step_coh", r.step_coh},
          {"ord_cons", r.ord_cons},
          {"merge_pur", r.merge_pur}}},
        {"diagnostics",
         {{"matches", matches},
          {"strong_matches", r.strong_matches},
          {"strong_similarity_sum", r.strong_similarity_sum},
          {"step_coherence", {{"touched", touched}}},
          {"merge_purity",
           {{"conditional_entropy", r.merge_pur_detail.conditional_entropy},
            {"active_gt_steps", r.merge_pur_detail.active_gt_steps},
            {"total_mass", r.merge_pur_detail.total_mass},
            {"weights", weights}}},
          {"order_consistency",
           {{"comparable_pairs", r.ord_cons_detail.comparable_pairs},
            {"inversions", r.ord_cons_detail.inversions}}}}},
        {"warnings", r.warnings},
    };
}

nlohmann::json to_json(const JudgedMetric& m) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& [id, v] : m.per_instance) {
        nlohmann::json row = {{"instance", id}, {"score", optional_number(v)}};
        if (auto it = m.failure_reasons.find(id); it != m.failure_reasons.end()) {
            row["failure"] = it->second;
        }
        per.push_back(std::move(row));
    }
    return {
        {"value", optional_number(m.value)},
        {"instances_scored", m.instances_scored},
        {"judge_failures", m.judge_failures},
        {"instances", per},
    };
}

nlohmann::json to_json(const OutcomeDistribution& d) {
    nlohmann::json counts = nlohmann::json::object();
    nlohmann::json fractions = nlohmann::json::object();
    for (std::size_t k = 0; k < kOutcomeCount; ++k) {
        const std::string name(outcome_name(static_cast<Outcome>(k)));
        counts[name] = d.counts[k];
        fractions[name] = d.fractions[k];
    }
    return {{"total", d.total}, {"counts", counts}, {"fractions", fractions}};
}

nlohmann::json corpus_document(const CorpusReport& corpus,
                               const RunConfig& cfg,
                               const std::vector<std::string>& warnings) {
    nlohmann::json metrics = nlohmann::json::object();
    const auto values = corpus.values();
    for (std::size_t i = 0; i < kMetricCount; ++i) {
        metrics[kMetricNames[i]] = optional_number(values[i]);
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : corpus.samples) {
        samples.push_back(to_json(s));
    }
    return {
        {"config", to_json(cfg)},
        {"corpus",
         {{"metrics", metrics},
          {"arg_sim_defined", corpus.arg_sim_defined},
          {"average_score", corpus.average_score},
          {"judge_failures", corpus.judge_failures},
          {"n_samples", corpus.samples.size()}}},
        {"samples", samples},
        {"warnings", warnings},
    };
}

nlohmann::json sample_document(const SampleReport& r, const RunConfig& cfg) {
    return {{"config", to_json(cfg)}, {"sample", to_json(r)}};
}

std::string leaderboard_header() {
    return "Model,Recall,Precision,Argument Similarity,Step Coherence,Order Consistency,Merge Purity,"
           "Task Completion,Information Grounding,Average Score";
}

std::string leaderboard_row(const std::string& model, const CorpusReport& corpus) {
    std::string row = csv_cell(model);
    for (const auto& v : corpus.values()) {
        row += ',';
        if (v) {
            row += fixed(*v);
        }
    }
    row += ',' + fixed(corpus.average_score);
    return row;
}

std::string leaderboard_csv(const std::string& model, const CorpusReport& corpus) {
    return leaderboard_header() + "\n" + leaderboard_row(model, corpus) + "\n";
}

std::string render_json(const nlohmann::json& doc) {
    return doc.dump(2) + "\n";
}

}  // namespace trajalign
