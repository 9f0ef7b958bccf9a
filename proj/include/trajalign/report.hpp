#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "trajalign/config.hpp"
#include "trajalign/judge.hpp"
#include "trajalign/metrics.hpp"
#include "trajalign/outcome.hpp"

namespace trajalign {

nlohmann::json to_json(const SampleReport& r);
nlohmann::json to_json(const JudgedMetric& m);
nlohmann::json to_json(const OutcomeDistribution& d);

/// Corpus document: config echo, corpus metrics, per-sample reports.
nlohmann::json corpus_document(const CorpusReport& corpus,
                               const RunConfig& cfg,
                               const std::vector<std::string>& warnings = {});
nlohmann::json sample_document(const SampleReport& r, const RunConfig& cfg);

/// Leaderboard header in table order, ending with the average score.
std::string leaderboard_header();
/// One leaderboard row; absent judge metrics are empty cells.
std::string leaderboard_row(const std::string& model, const CorpusReport& corpus);
std::string leaderboard_csv(const std::string& model, const CorpusReport& corpus);

/// Stable text form of a JSON document (two-space indent, trailing newline).
std::string render_json(const nlohmann::json& doc);

}  // namespace trajalign
