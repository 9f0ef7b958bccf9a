#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trajalign/config.hpp"
#include "trajalign/errors.hpp"
#include "trajalign/judge.hpp"
#include "trajalign/metrics.hpp"

namespace trajalign {

/// An engine error tagged with the file it came from.
class FileError : public Error {
public:
    FileError(const Error& cause, std::string file)
        : Error(cause.kind(), cause.what()), file_(std::move(file)) {}
    const std::string& file() const noexcept { return file_; }

private:
    std::string file_;
};

/// `{"error": {"kind", "message", "file"}}` on one line.
nlohmann::json error_record(const Error& e);

enum class OutputFormat { Json, Csv };
OutputFormat parse_format(const std::string& s);

// --------------------------------------------------------------- score/batch

struct ScoreOptions {
    std::filesystem::path pred;
    std::filesystem::path ref;
    std::optional<std::filesystem::path> out;
    OutputFormat format = OutputFormat::Json;
};

struct BatchOptions {
    std::filesystem::path pred_dir;
    std::filesystem::path ref_dir;
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> csv_out;  ///< leaderboard next to the JSON
    OutputFormat format = OutputFormat::Json;
    std::string model;  ///< leaderboard row label; defaults to the pred dir name
    std::optional<std::filesystem::path> task_responses;
    std::optional<std::filesystem::path> grounding_responses;
};

struct SamplePair {
    std::string sample_id;  ///< relative path without the .json extension
    std::filesystem::path pred;
    std::filesystem::path ref;
};

struct Pairing {
    std::vector<SamplePair> pairs;  ///< sorted by sample id
    std::vector<std::string> warnings;
};

/// Match `*.json` files under both directories by identical relative path.
/// Unpaired files become warnings, or a PairingError when `strict`.
Pairing pair_files(const std::filesystem::path& pred_dir, const std::filesystem::path& ref_dir, bool strict);

struct BatchResult {
    CorpusReport corpus;
    std::string encoder_identity;
    std::vector<std::string> warnings;
    std::optional<JudgedMetric> task;
    std::optional<JudgedMetric> grounding;
};

/// Score every pair (up to cfg.jobs at once) and fold the corpus.
BatchResult run_batch(const BatchOptions& opts, const RunConfig& cfg);

// -------------------------------------------------------------------- judges

enum class JudgeMode { Task, Grounding };
JudgeMode parse_judge_mode(const std::string& s);

/// Judge responses file. Task mode:
///   {"instances": [{"instance", "responses": [{"judge_id", "text" | "error"}]}]}
/// or, to query the configured judges, {"instance", "prompt", "attachments"}.
/// Grounding mode:
///   {"instances": [{"instance", "tables": [{"judge_id", "scores":
///       [{"gt_step", "pred_step", "score" | "text"}]} | {"judge_id", "error"}]}]}
/// or {"instance", "step_pairs": [{"gt_step", "pred_step", "prompt"}]}.
/// Malformed instances are flagged as failures and the run continues.
JudgedMetric judge_responses(const nlohmann::json& doc,
                             JudgeMode mode,
                             const RunConfig& cfg,
                             std::optional<ScoreScale> scale = std::nullopt);
JudgedMetric judge_responses_file(const std::filesystem::path& path,
                                  JudgeMode mode,
                                  const RunConfig& cfg,
                                  std::optional<ScoreScale> scale = std::nullopt);

/// Judge pool from the config: "http://..." endpoints or "mock:<fixture>".
std::vector<JudgeEndpoint> make_judge_pool(const RunConfig& cfg);

// --------------------------------------------------------------- subcommands
//
// Each returns the process exit code. Results go to `out` (or the --out
// file); error records go to `err`.

int cmd_score(const ScoreOptions& opts, const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_batch(const BatchOptions& opts, const RunConfig& cfg, std::ostream& out, std::ostream& err);

struct ClassifyOptions {
    std::filesystem::path log;
    std::filesystem::path registry;
    std::optional<std::filesystem::path> out;
};
int cmd_classify_calls(const ClassifyOptions& opts, std::ostream& out, std::ostream& err);

struct JudgeOptions {
    std::filesystem::path responses;
    JudgeMode mode = JudgeMode::Task;
    std::optional<ScoreScale> scale;
    std::optional<std::filesystem::path> out;
};
int cmd_judge_aggregate(const JudgeOptions& opts, const RunConfig& cfg, std::ostream& out, std::ostream& err);

struct RenderOptions {
    std::string template_name;
    std::optional<std::filesystem::path> context_file;  ///< JSON object of strings
    std::map<std::string, std::string> context;        ///< overrides the file
    std::optional<std::filesystem::path> out;
};
int cmd_render_prompt(const RenderOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace trajalign
