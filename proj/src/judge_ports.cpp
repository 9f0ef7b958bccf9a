#include <future>
#include <semaphore>
#include <thread>

#include <httplib.h>

#include "trajalign/errors.hpp"
#include "trajalign/judge.hpp"

namespace trajalign {

MockJudge::MockJudge(const nlohmann::json& fixture) {
    if (!fixture.is_object() || !fixture.contains("responses") || !fixture["responses"].is_array()) {
        throw SchemaError("mock judge fixture needs a \"responses\" array");
    }
    std::size_t i = 0;
    for (const auto& r : fixture["responses"]) {
        const std::string where = "/responses/" + std::to_string(i++);
        if (!r.is_object() || !r.contains("judge_id") || !r["judge_id"].is_string() || !r.contains("instance") ||
            !r["instance"].is_string()) {
            throw SchemaError(where + ": needs string judge_id and instance");
        }
        if (r.contains("text") == r.contains("error")) {
            throw SchemaError(where + ": needs exactly one of text or error");
        }
        script_[{r["judge_id"].get<std::string>(), r["instance"].get<std::string>()}] = r;
    }
}

std::string MockJudge::submit(const JudgeRequest& request) {
    auto it = script_.find({request.judge_id, request.instance_id});
    if (it == script_.end()) {
        throw JudgeError("mock judge '" + request.judge_id + "' has no response for instance '" +
                         request.instance_id + "'");
    }
    if (it->second.contains("error")) {
        throw JudgeError("judge '" + request.judge_id + "': " + it->second["error"].get<std::string>());
    }
    return it->second["text"].get<std::string>();
}

HttpJudge::HttpJudge(std::string url, std::chrono::seconds timeout, int retries)
    : url_(std::move(url)), timeout_(timeout), retries_(retries) {}

std::string HttpJudge::submit(const JudgeRequest& request) {
    auto scheme = url_.find("://");
    auto path_start = url_.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    const std::string base = path_start == std::string::npos ? url_ : url_.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url_.substr(path_start);

    const nlohmann::json body = {
        {"judge_id", request.judge_id}, {"prompt", request.prompt}, {"attachments", request.attachments}};
    std::string last_error;
    for (int attempt = 0; attempt <= retries_; ++attempt) {
        httplib::Client client(base);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        auto res = client.Post(path, body.dump(), "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        auto reply = nlohmann::json::parse(res->body, nullptr, false);
        if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
            throw JudgeError("judge '" + request.judge_id + "' at " + url_ + " replied without a \"text\" string");
        }
        return reply["text"].get<std::string>();
    }
    throw JudgeError("judge '" + request.judge_id + "' at " + url_ + " failed after " +
                     std::to_string(retries_ + 1) + " attempts: " + last_error);
}

JudgeEnsemble::JudgeEnsemble(std::vector<JudgeEndpoint> pool, std::size_t max_in_flight)
    : pool_(std::move(pool)), max_in_flight_(max_in_flight == 0 ? 1 : max_in_flight) {
    for (const auto& e : pool_) {
        if (!e.port) {
            throw ConfigError("judge '" + e.judge_id + "' has no port");
        }
    }
}

InstanceJudgement JudgeEnsemble::judge(const std::string& instance_id,
                                       const std::string& prompt,
                                       const std::vector<std::string>& attachments,
                                       ScoreScale scale) const {
    struct Outcome {
        std::optional<JudgeVerdict> verdict;
        std::string failure;
    };
    std::counting_semaphore<> slots(static_cast<std::ptrdiff_t>(max_in_flight_));
    std::vector<std::future<Outcome>> pending;
    pending.reserve(pool_.size());
    for (const auto& endpoint : pool_) {
        pending.push_back(std::async(std::launch::async, [&, endpoint] {
            slots.acquire();
            Outcome o;
            try {
                JudgeRequest req{endpoint.judge_id, instance_id, prompt, attachments};
                std::string text = endpoint.port->submit(req);
                const double score = parse_boxed_score(text, scale);
                o.verdict = JudgeVerdict{endpoint.judge_id, std::move(text), score, scale};
            } catch (const Error& e) {
                o.failure = endpoint.judge_id + ": " + e.kind() + ": " + e.what();
            } catch (const std::exception& e) {
                o.failure = endpoint.judge_id + ": " + e.what();
            }
            slots.release();
            return o;
        }));
    }
    InstanceJudgement out;
    out.instance_id = instance_id;
    for (auto& f : pending) {
        Outcome o = f.get();
        if (o.verdict) {
            out.verdicts.push_back(std::move(*o.verdict));
        } else {
            out.failures.push_back(std::move(o.failure));
        }
    }
    return out;
}

}  // namespace trajalign
