#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>

#include "trajalign/errors.hpp"
#include "trajalign/judge.hpp"

#include <httplib.h>

using namespace trajalign;
using nlohmann::json;

namespace {

bool contains(std::string_view hay, std::string_view needle) {
    return hay.find(needle) != std::string_view::npos;
}

std::string last_line(std::string_view s) {
    while (!s.empty() && s.back() == '\n') {
        s.remove_suffix(1);
    }
    const auto nl = s.rfind('\n');
    return std::string(nl == std::string_view::npos ? s : s.substr(nl + 1));
}

std::vector<JudgeVerdict> verdicts(std::initializer_list<double> scores) {
    std::vector<JudgeVerdict> out;
    int i = 0;
    for (double s : scores) {
        out.push_back({"j" + std::to_string(i++), "", s, ScoreScale::Unit});
    }
    return out;
}

StepScoreTable table(std::string id, std::initializer_list<std::pair<std::pair<std::size_t, std::size_t>, double>> s) {
    StepScoreTable t{std::move(id), {}};
    for (const auto& [k, v] : s) {
        t.scores[k] = v;
    }
    return t;
}

}  // namespace

TEST_CASE("template names round trip") {
    for (auto t : all_templates()) {
        CHECK(parse_template_name(template_name(t)) == t);
        CHECK_FALSE(template_text(t).empty());
    }
    CHECK(all_templates().size() == 8);
    CHECK_THROWS_AS(parse_template_name("nope"), ConfigError);
}

TEST_CASE("task completion prompt") {
    const auto text = template_text(PromptTemplate::TaskCompletion);
    CHECK(contains(text, "Planning (0-3)"));
    CHECK(contains(text, "Process (0-3)"));
    CHECK(contains(text, "Final result (0-4)"));
    CHECK(contains(text, "S is a float in [0,10]"));
    CHECK(contains(text, "output only \\boxed{S}"));
    CHECK(template_placeholders(PromptTemplate::TaskCompletion).empty());
    CHECK(render_prompt(PromptTemplate::TaskCompletion, {}) == text);
}

TEST_CASE("information grounding prompt") {
    const auto text = template_text(PromptTemplate::InformationGrounding);
    CHECK(contains(text, "output only a scalar in the form \\boxed{G}"));
    CHECK(contains(text, "Extra steps are not penalized"));
    CHECK(contains(text, "G is a float in [0,1]"));
}

TEST_CASE("stop prompt ends with the strict yes/no instruction") {
    const auto rendered = render_prompt(PromptTemplate::Stop, {{"last_user", "find cats"}});
    CHECK(last_line(rendered).starts_with("Answer strictly with 'yes' or 'no'"));
    CHECK(contains(rendered, "original question: find cats,"));
    CHECK_THROWS_AS(render_prompt(PromptTemplate::Stop, {}), MissingPlaceholderError);
}

TEST_CASE("placeholders") {
    CHECK(template_placeholders(PromptTemplate::Prepare) == std::vector<std::string>{"i", "self.max_step"});
    CHECK(template_placeholders(PromptTemplate::Process) == std::vector<std::string>{"self.max_concurrent"});
    CHECK(template_placeholders(PromptTemplate::Stop) == std::vector<std::string>{"last_user"});
    CHECK(template_placeholders(PromptTemplate::Summarize).empty());

    const auto p = render_prompt(PromptTemplate::Prepare, {{"i", "2"}, {"self.max_step", "5"}, {"unused", "x"}});
    CHECK(contains(p, "This is step 2 of 5."));
    try {
        render_prompt(PromptTemplate::Prepare, {{"i", "2"}});
        FAIL("expected MissingPlaceholderError");
    } catch (const MissingPlaceholderError& e) {
        CHECK(contains(e.what(), "self.max_step"));
    }
    // JSON braces in the process template are literal
    const auto proc = render_prompt(PromptTemplate::Process, {{"self.max_concurrent", "3"}});
    CHECK(contains(proc, "containing 1 to 3 items"));
    CHECK(contains(proc, R"({"name": "server_name/tool_name", "arguments": { ... }})"));
}

TEST_CASE("boxed score parsing") {
    CHECK(parse_boxed_score("final: \\boxed{7.5}", ScoreScale::TenToUnit) == doctest::Approx(0.75));
    CHECK(parse_boxed_score("\\boxed{0.9}", ScoreScale::Unit) == doctest::Approx(0.9));
    CHECK(parse_boxed_score("first \\boxed{3} then \\boxed{8}", ScoreScale::TenToUnit) == doctest::Approx(0.8));
    CHECK(parse_boxed_score("\\boxed{ 10 }", ScoreScale::TenToUnit) == 1.0);
    CHECK(parse_boxed_score("\\boxed{12}", ScoreScale::TenToUnit) == 1.0);
    CHECK(parse_boxed_score("\\boxed{-1}", ScoreScale::Unit) == 0.0);
    CHECK(parse_boxed_score("\\boxed{0.4} \\boxed{S}", ScoreScale::Unit) == doctest::Approx(0.4));
    CHECK_THROWS_AS(parse_boxed_score("score: 7", ScoreScale::TenToUnit), NoScoreError);
    CHECK_THROWS_AS(parse_boxed_score("\\boxed{S}", ScoreScale::TenToUnit), NoScoreError);
    CHECK_THROWS_AS(parse_boxed_score("", ScoreScale::Unit), NoScoreError);
}

TEST_CASE("trimmed mean") {
    const std::array<double, 4> a = {0.2, 0.9, 0.5, 0.6};
    CHECK(trimmed_mean(a) == doctest::Approx(0.55));
    const std::array<double, 4> b = {1.0, 1.0, 1.0, 1.0};
    CHECK(trimmed_mean(b) == 1.0);
    const std::array<double, 4> c = {0.0, 0.0, 1.0, 1.0};
    CHECK(trimmed_mean(c) == 0.5);
    const std::array<double, 4> d = {0.3, 0.3, 0.3, 0.9};
    CHECK(trimmed_mean(d) == doctest::Approx(0.3));
    const std::array<double, 3> three = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(trimmed_mean(three), ArityError);
    const std::array<double, 5> five = {0.1, 0.2, 0.3, 0.4, 0.5};
    CHECK_THROWS_AS(trimmed_mean(five), ArityError);
    const std::array<double, 4> nan = {0.1, std::nan(""), 0.3, 0.4};
    CHECK_THROWS_AS(trimmed_mean(nan), DomainError);
}

TEST_CASE("trimmed mean matches sort-and-average and is monotone") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> grid(0, 4);
    for (int k = 0; k < 1000; ++k) {
        std::array<double, 4> s;
        for (auto& x : s) {
            x = k % 2 ? u(rng) : grid(rng) / 4.0;
        }
        auto sorted = s;
        std::sort(sorted.begin(), sorted.end());
        const double tm = trimmed_mean(s);
        CHECK(tm == doctest::Approx((sorted[1] + sorted[2]) / 2.0));
        CHECK(tm >= sorted[0]);
        CHECK(tm <= sorted[3]);
        auto raised = s;
        raised[k % 4] = std::min(1.0, raised[k % 4] + u(rng));
        CHECK(trimmed_mean(raised) >= tm - 1e-15);
    }
}

TEST_CASE("task completion over verdicts") {
    CHECK(task_completion(verdicts({0.8, 0.6, 0.7, 0.9})) == doctest::Approx(0.75));
    CHECK_THROWS_AS(task_completion(verdicts({0.8, 0.6, 0.7})), ArityError);
}

TEST_CASE("task completion corpus excludes failed instances") {
    std::vector<InstanceJudgement> inst(3);
    inst[0] = {"a", verdicts({0.8, 0.6, 0.7, 0.9}), {}};
    inst[1] = {"b", verdicts({0.1, 0.2, 0.3}), {"j3: JudgeError: timeout"}};
    inst[2] = {"c", verdicts({0.5, 0.5, 0.5, 0.5}), {}};
    const auto m = task_completion_corpus(inst);
    CHECK(m.instances_scored == 2);
    CHECK(m.judge_failures == 1);
    CHECK(*m.value == doctest::Approx(0.625));
    CHECK(m.failure_reasons.at("b") == "j3: JudgeError: timeout");
    REQUIRE(m.per_instance.size() == 3);
    CHECK_FALSE(m.per_instance[1].second.has_value());

    const auto none = task_completion_corpus({{"x", verdicts({0.1}), {}}});
    CHECK_FALSE(none.value.has_value());
    CHECK(none.judge_failures == 1);
    CHECK(none.failure_reasons.at("x") == "expected 4 verdicts, got 1");
}

TEST_CASE("information grounding") {
    std::vector<StepScoreTable> t = {
        table("a", {{{0, 0}, 1.0}, {{1, 1}, 0.5}}),
        table("b", {{{0, 0}, 0.8}, {{1, 1}, 0.5}}),
        table("c", {{{0, 0}, 0.6}, {{1, 1}, 0.0}}),
        table("d", {{{0, 0}, 0.4}, {{1, 1}, 1.0}}),
    };
    // pair (0,0): mean(0.8, 0.6) = 0.7; pair (1,1): mean(0.5, 0.5) = 0.5
    CHECK(information_grounding(t) == doctest::Approx(0.6));

    auto short_pool = t;
    short_pool.pop_back();
    CHECK_THROWS_AS(information_grounding(short_pool), ArityError);

    auto mismatch = t;
    mismatch[2].scores.erase({1, 1});
    mismatch[2].scores[{2, 2}] = 0.1;
    CHECK_THROWS_AS(information_grounding(mismatch), ShapeError);

    std::vector<StepScoreTable> empty(4);
    CHECK_THROWS_AS(information_grounding(empty), ShapeError);

    std::vector<GroundingInstance> corpus = {{"ok", t, {}}, {"bad", mismatch, {}}, {"down", {}, {"d: JudgeError: x"}}};
    const auto m = information_grounding_corpus(corpus);
    CHECK(m.instances_scored == 1);
    CHECK(m.judge_failures == 2);
    CHECK(*m.value == doctest::Approx(0.6));
    CHECK(m.failure_reasons.at("bad").starts_with("ShapeError: "));
    CHECK(m.failure_reasons.at("down") == "d: JudgeError: x");
}

TEST_CASE("mock judge") {
    const json fixture = {{"responses",
                           {{{"judge_id", "a"}, {"instance", "1"}, {"text", "\\boxed{6}"}},
                            {{"judge_id", "b"}, {"instance", "1"}, {"error", "timeout"}}}}};
    MockJudge judge(fixture);
    CHECK(judge.submit({"a", "1", "p", {}}) == "\\boxed{6}");
    CHECK_THROWS_AS(judge.submit({"b", "1", "p", {}}), JudgeError);
    CHECK_THROWS_AS(judge.submit({"a", "2", "p", {}}), JudgeError);

    CHECK_THROWS_AS(MockJudge(json::object()), SchemaError);
    CHECK_THROWS_AS(MockJudge(json{{"responses", {{{"judge_id", "a"}, {"instance", "1"}}}}}), SchemaError);
    CHECK_THROWS_AS(MockJudge(json{{"responses", {{{"judge_id", "a"}, {"instance", "1"}, {"text", "x"}, {"error", "y"}}}}}),
                    SchemaError);
}

TEST_CASE("ensemble records failures and keeps pool order") {
    const json fixture = {{"responses",
                           {{{"judge_id", "a"}, {"instance", "i"}, {"text", "\\boxed{8}"}},
                            {{"judge_id", "b"}, {"instance", "i"}, {"text", "\\boxed{6}"}},
                            {{"judge_id", "c"}, {"instance", "i"}, {"text", "no score"}},
                            {{"judge_id", "d"}, {"instance", "i"}, {"text", "\\boxed{9}"}},
                            {{"judge_id", "c"}, {"instance", "j"}, {"text", "\\boxed{5}"}}}}};
    auto mock = std::make_shared<MockJudge>(fixture);
    JudgeEnsemble ens({{"a", mock}, {"b", mock}, {"c", mock}, {"d", mock}}, 2);
    const auto r = ens.judge("i", "prompt", {}, ScoreScale::TenToUnit);
    REQUIRE(r.verdicts.size() == 3);
    CHECK(r.verdicts[0].judge_id == "a");
    CHECK(r.verdicts[0].score == doctest::Approx(0.8));
    CHECK(r.verdicts[2].judge_id == "d");
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].starts_with("c: NoScoreError"));

    const auto j = ens.judge("j", "prompt", {}, ScoreScale::TenToUnit);
    CHECK(j.verdicts.size() == 1);
    CHECK(j.failures.size() == 3);

    CHECK_THROWS_AS(JudgeEnsemble({{"x", nullptr}}), ConfigError);
}

TEST_CASE("http judge") {
    httplib::Server server;
    std::atomic<int> flaky_calls{0};
    server.Post("/judge", [](const httplib::Request& req, httplib::Response& res) {
        const auto body = json::parse(req.body);
        const std::string id = body["judge_id"];
        res.set_content(json{{"text", id + " says \\boxed{" + std::to_string(body["prompt"].get<std::string>().size()) +
                                          "}"}}.dump(),
                        "application/json");
    });
    server.Post("/flaky", [&](const httplib::Request&, httplib::Response& res) {
        if (flaky_calls++ == 0) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"text": "\\boxed{0.5}"})", "application/json");
    });
    server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    server.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("[]", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);

    HttpJudge judge(base + "/judge", std::chrono::seconds(5), 0);
    CHECK(judge.submit({"q", "i", "abcd", {}}) == "q says \\boxed{4}");

    HttpJudge flaky(base + "/flaky", std::chrono::seconds(5), 1);
    CHECK(flaky.submit({"q", "i", "p", {}}) == "\\boxed{0.5}");
    CHECK(flaky_calls == 2);

    HttpJudge down(base + "/down", std::chrono::seconds(5), 1);
    CHECK_THROWS_AS(down.submit({"q", "i", "p", {}}), JudgeError);
    HttpJudge bad(base + "/bad", std::chrono::seconds(5), 0);
    CHECK_THROWS_AS(bad.submit({"q", "i", "p", {}}), JudgeError);

    auto http = std::make_shared<HttpJudge>(base + "/judge", std::chrono::seconds(5), 0);
    JudgeEnsemble ens({{"a", http}, {"b", http}, {"c", http}, {"d", http}}, 4);
    const auto r = ens.judge("i", "1234567", {}, ScoreScale::TenToUnit);
    CHECK(r.failures.empty());
    REQUIRE(r.verdicts.size() == 4);
    CHECK(task_completion(r.verdicts) == doctest::Approx(0.7));

    server.stop();
    th.join();
}
