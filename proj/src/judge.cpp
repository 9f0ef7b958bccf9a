#include "trajalign/judge.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <regex>
#include <set>

#include "trajalign/errors.hpp"

namespace trajalign {

namespace detail {
std::string_view stored_template(PromptTemplate t);
}

namespace {

constexpr std::pair<PromptTemplate, std::string_view> kNames[] = {
    {PromptTemplate::TaskCompletion, "task_completion"},
    {PromptTemplate::InformationGrounding, "information_grounding"},
    {PromptTemplate::Prepare, "prepare"},
    {PromptTemplate::Process, "process"},
    {PromptTemplate::Stop, "stop"},
    {PromptTemplate::Final, "final"},
    {PromptTemplate::Judge, "judge"},
    {PromptTemplate::Summarize, "summarize"},
};

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

/// Length of a `{name}` placeholder starting at `pos`, 0 if none.
std::size_t placeholder_at(std::string_view text, std::size_t pos) {
    if (text[pos] != '{') {
        return 0;
    }
    if (pos > 0 && std::isalnum(static_cast<unsigned char>(text[pos - 1]))) {
        return 0;
    }
    std::size_t i = pos + 1;
    while (true) {
        if (i >= text.size() || !is_ident_start(text[i])) {
            return 0;
        }
        while (i < text.size() && is_ident_char(text[i])) {
            ++i;
        }
        if (i < text.size() && text[i] == '.') {
            ++i;
            continue;
        }
        break;
    }
    if (i >= text.size() || text[i] != '}') {
        return 0;
    }
    return i + 1 - pos;
}

std::optional<double> parse_number(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    if (s.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

}  // namespace

std::string_view template_name(PromptTemplate t) {
    for (const auto& [id, name] : kNames) {
        if (id == t) {
            return name;
        }
    }
    return "unknown";
}

PromptTemplate parse_template_name(std::string_view name) {
    for (const auto& [id, n] : kNames) {
        if (n == name) {
            return id;
        }
    }
    throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

std::vector<PromptTemplate> all_templates() {
    std::vector<PromptTemplate> out;
    for (const auto& [id, name] : kNames) {
        out.push_back(id);
    }
    return out;
}

std::string_view template_text(PromptTemplate t) {
    return detail::stored_template(t);
}

std::vector<std::string> template_placeholders(PromptTemplate t) {
    const std::string_view text = template_text(t);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::size_t len = placeholder_at(text, i)) {
            std::string name(text.substr(i + 1, len - 2));
            if (std::find(out.begin(), out.end(), name) == out.end()) {
                out.push_back(std::move(name));
            }
            i += len - 1;
        }
    }
    return out;
}

std::string render_prompt(PromptTemplate t, const std::map<std::string, std::string>& context) {
    const std::string_view text = template_text(t);
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (std::size_t len = placeholder_at(text, i)) {
            const std::string name(text.substr(i + 1, len - 2));
            auto it = context.find(name);
            if (it == context.end()) {
                throw MissingPlaceholderError("template '" + std::string(template_name(t)) +
                                              "' needs placeholder '" + name + "'");
            }
            out += it->second;
            i += len - 1;
        } else {
            out += text[i];
        }
    }
    return out;
}

double parse_boxed_score(std::string_view response, ScoreScale scale) {
    static const std::regex boxed(R"(\\boxed\{([^{}]*)\})");
    std::optional<double> last;
    const std::string s(response);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), boxed); it != std::sregex_iterator(); ++it) {
        if (auto v = parse_number((*it)[1].str())) {
            last = v;
        }
    }
    if (!last) {
        throw NoScoreError("no \\boxed{<number>} in judge response");
    }
    double v = *last;
    if (scale == ScoreScale::TenToUnit) {
        v /= 10.0;
    }
    return std::clamp(v, 0.0, 1.0);
}

double trimmed_mean(std::span<const double> scores) {
    if (scores.size() != 4) {
        throw ArityError("trimmed mean needs exactly 4 scores, got " + std::to_string(scores.size()));
    }
    for (double s : scores) {
        if (!std::isfinite(s)) {
            throw DomainError("trimmed mean over a non-finite score");
        }
    }
    std::size_t lo = 0;
    std::size_t hi = 0;
    for (std::size_t i = 1; i < 4; ++i) {
        if (scores[i] < scores[lo]) {
            lo = i;
        }
        if (scores[i] > scores[hi]) {
            hi = i;
        }
    }
    if (lo == hi) {
        // all scores equal; drop the next index as the maximum
        hi = lo == 0 ? 1 : 0;
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        if (i != lo && i != hi) {
            sum += scores[i];
        }
    }
    return sum / 2.0;
}

double task_completion(std::span<const JudgeVerdict> verdicts) {
    std::vector<double> scores;
    scores.reserve(verdicts.size());
    for (const auto& v : verdicts) {
        scores.push_back(v.score);
    }
    return trimmed_mean(scores);
}

JudgedMetric task_completion_corpus(const std::vector<InstanceJudgement>& instances) {
    JudgedMetric out;
    double sum = 0.0;
    for (const auto& inst : instances) {
        if (!inst.failures.empty() || inst.verdicts.size() != 4) {
            ++out.judge_failures;
            out.failure_reasons[inst.instance_id] =
                inst.failures.empty() ? "expected 4 verdicts, got " + std::to_string(inst.verdicts.size())
                                      : inst.failures.front();
            out.per_instance.emplace_back(inst.instance_id, std::nullopt);
            continue;
        }
        const double v = task_completion(inst.verdicts);
        sum += v;
        ++out.instances_scored;
        out.per_instance.emplace_back(inst.instance_id, v);
    }
    if (out.instances_scored > 0) {
        out.value = sum / static_cast<double>(out.instances_scored);
    }
    return out;
}

double information_grounding(std::span<const StepScoreTable> tables) {
    if (tables.size() != 4) {
        throw ArityError("information grounding needs 4 judge tables, got " + std::to_string(tables.size()));
    }
    const auto& keys = tables.front().scores;
    if (keys.empty()) {
        throw ShapeError("judge '" + tables.front().judge_id + "' scored no step pairs");
    }
    for (const auto& t : tables) {
        bool same = t.scores.size() == keys.size() &&
                    std::equal(t.scores.begin(), t.scores.end(), keys.begin(),
                               [](const auto& a, const auto& b) { return a.first == b.first; });
        if (!same) {
            throw ShapeError("judge '" + t.judge_id + "' scored a different set of step pairs than judge '" +
                             tables.front().judge_id + "'");
        }
    }
    double sum = 0.0;
    for (const auto& [key, unused] : keys) {
        std::array<double, 4> per_judge{};
        for (std::size_t j = 0; j < 4; ++j) {
            per_judge[j] = tables[j].scores.at(key);
        }
        sum += trimmed_mean(per_judge);
    }
    return sum / static_cast<double>(keys.size());
}

JudgedMetric information_grounding_corpus(const std::vector<GroundingInstance>& instances) {
    JudgedMetric out;
    double sum = 0.0;
    for (const auto& inst : instances) {
        std::optional<double> v;
        std::string reason = inst.failures.empty() ? "" : inst.failures.front();
        if (inst.failures.empty()) {
            try {
                v = information_grounding(inst.tables);
            } catch (const Error& e) {
                reason = e.kind() + ": " + e.what();
            }
        }
        if (!v) {
            ++out.judge_failures;
            out.failure_reasons[inst.instance_id] = reason;
        } else {
            sum += *v;
            ++out.instances_scored;
        }
        out.per_instance.emplace_back(inst.instance_id, v);
    }
    if (out.instances_scored > 0) {
        out.value = sum / static_cast<double>(out.instances_scored);
    }
    return out;
}

}  // namespace trajalign
