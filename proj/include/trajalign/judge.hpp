#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace trajalign {

// ------------------------------------------------------------------ prompts

enum class PromptTemplate {
    TaskCompletion,
    InformationGrounding,
    Prepare,
    Process,
    Stop,
    Final,
    Judge,
    Summarize,
};

/// "task_completion", "information_grounding", "prepare", ...
std::string_view template_name(PromptTemplate t);
/// Inverse of template_name; throws ConfigError on unknown names.
PromptTemplate parse_template_name(std::string_view name);
std::vector<PromptTemplate> all_templates();

/// The stored template text, unrendered.
std::string_view template_text(PromptTemplate t);

/// Placeholder names appearing in a template, in order of first use. A
/// placeholder is `{name}` or `{dotted.name}` not directly preceded by a
/// letter or digit, so `\boxed{S}` is literal text.
std::vector<std::string> template_placeholders(PromptTemplate t);

/// Substitute every placeholder from `context`. Keys the template does not
/// use are ignored. Throws MissingPlaceholderError naming the first missing
/// placeholder.
std::string render_prompt(PromptTemplate t, const std::map<std::string, std::string>& context);

// ------------------------------------------------------------------ scoring

enum class ScoreScale {
    TenToUnit,  ///< judge answers on 0..10, divided by 10
    Unit,       ///< judge answers on 0..1
};

/// Value of the last `\boxed{<number>}` in the response, scaled and clamped
/// to [0,1]. Throws NoScoreError when no boxed number exists.
double parse_boxed_score(std::string_view response, ScoreScale scale);

/// Drop one lowest and one highest score (lowest index on ties) and average
/// the two that remain. Throws ArityError unless exactly four scores are
/// given, DomainError on non-finite scores.
double trimmed_mean(std::span<const double> scores);

struct JudgeVerdict {
    std::string judge_id;
    std::string raw_response;
    double score = 0.0;
    ScoreScale scale_applied = ScoreScale::Unit;
};

/// Trimmed mean over the verdicts of the four judges.
double task_completion(std::span<const JudgeVerdict> verdicts);

/// Verdicts (or failures) of the judge pool for one instance.
struct InstanceJudgement {
    std::string instance_id;
    std::vector<JudgeVerdict> verdicts;
    std::vector<std::string> failures;
};

struct JudgedMetric {
    std::optional<double> value;  ///< mean over scored instances
    std::size_t instances_scored = 0;
    std::size_t judge_failures = 0;  ///< instances excluded for failed judges
    std::vector<std::pair<std::string, std::optional<double>>> per_instance;
    std::map<std::string, std::string> failure_reasons;
};

/// Corpus Task Completion: mean of per-instance trimmed means. Instances
/// without four verdicts are excluded and counted as judge failures.
JudgedMetric task_completion_corpus(const std::vector<InstanceJudgement>& instances);

/// One judge's step-level groundedness scores keyed by
/// (reference step, predicted step).
struct StepScoreTable {
    std::string judge_id;
    std::map<std::pair<std::size_t, std::size_t>, double> scores;
};

/// Per step pair trimmed mean, averaged uniformly over step pairs. Throws
/// ArityError unless four tables are given and ShapeError when they do not
/// cover the same non-empty set of step pairs.
double information_grounding(std::span<const StepScoreTable> tables);

struct GroundingInstance {
    std::string instance_id;
    std::vector<StepScoreTable> tables;
    std::vector<std::string> failures;
};

/// Corpus Information Grounding: mean over instances; instances with judge
/// failures or malformed tables are excluded and counted.
JudgedMetric information_grounding_corpus(const std::vector<GroundingInstance>& instances);

// -------------------------------------------------------------------- ports

struct JudgeRequest {
    std::string judge_id;
    std::string instance_id;
    std::string prompt;
    std::vector<std::string> attachments;
};

/// A judge model behind some transport. Responses are opaque text.
class JudgePort {
public:
    virtual ~JudgePort() = default;
    /// Throws JudgeError on transport failure or timeout.
    virtual std::string submit(const JudgeRequest& request) = 0;
};

/// Scripted judge for offline runs. Fixture:
/// `{"responses": [{"judge_id", "instance", "text"} | {"judge_id", "instance", "error"}]}`.
class MockJudge final : public JudgePort {
public:
    explicit MockJudge(const nlohmann::json& fixture);
    std::string submit(const JudgeRequest& request) override;

private:
    std::map<std::pair<std::string, std::string>, nlohmann::json> script_;
};

/// Judge over HTTP: POST {"judge_id","prompt","attachments"} and read
/// {"text"}. Retries transport failures and non-200 replies.
class HttpJudge final : public JudgePort {
public:
    HttpJudge(std::string url, std::chrono::seconds timeout = std::chrono::seconds(120), int retries = 2);
    std::string submit(const JudgeRequest& request) override;

private:
    std::string url_;
    std::chrono::seconds timeout_;
    int retries_;
};

struct JudgeEndpoint {
    std::string judge_id;
    std::shared_ptr<JudgePort> port;
};

/// Fans one prompt out to every judge (at most `max_in_flight` at once),
/// parses each reply, and records failures instead of imputing scores.
/// Verdicts come back in pool order whatever the completion order.
class JudgeEnsemble {
public:
    explicit JudgeEnsemble(std::vector<JudgeEndpoint> pool, std::size_t max_in_flight = 4);

    InstanceJudgement judge(const std::string& instance_id,
                            const std::string& prompt,
                            const std::vector<std::string>& attachments,
                            ScoreScale scale) const;

private:
    std::vector<JudgeEndpoint> pool_;
    std::size_t max_in_flight_;
};

}  // namespace trajalign
