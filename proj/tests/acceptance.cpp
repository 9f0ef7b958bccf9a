#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "support/oracles.hpp"
#include "trajalign/commands.hpp"
#include "trajalign/errors.hpp"
#include "trajalign/hungarian.hpp"
#include "trajalign/judge.hpp"
#include "trajalign/metrics.hpp"
#include "trajalign/outcome.hpp"

using namespace trajalign;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = TRAJALIGN_FIXTURES;

struct Check {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void report(const std::string& name, const std::function<void(Check&)>& body) {
    Check c;
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail = std::string("exception: ") + e.what();
    }
    if (!c.ok) {
        ++failures;
    }
    std::printf("%s %s%s%s\n", c.ok ? "PASS" : "FAIL", name.c_str(), c.detail.empty() ? "" : " -- ",
                c.detail.c_str());
    std::fflush(stdout);
}

/// Within-step shuffles keep the pair count and step shape of a trajectory.
bool within_limits(const Trajectory& t) {
    if (t.steps().size() > 5) {
        return false;
    }
    for (const auto& s : t.steps()) {
        if (s.calls.size() > 4) {
            return false;
        }
    }
    return true;
}

/// A match described by content rather than by flat index.
using MatchKey = std::tuple<std::size_t, std::size_t, std::string, double>;

std::vector<MatchKey> keyed(const SampleReport& r, const Trajectory& pred) {
    std::vector<MatchKey> out;
    for (const auto& m : r.matches.matches) {
        const auto& call = pred.flat_calls()[m.pred_index];
        out.emplace_back(m.gt_index, call.step_index, serialize_call(call, {}), m.similarity);
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool same_metrics(const SampleReport& a, const SampleReport& b) {
    return a.n_matched == b.n_matched && a.recall == b.recall && a.precision == b.precision &&
           a.arg_sim == b.arg_sim && a.step_coh == b.step_coh && a.merge_pur == b.merge_pur &&
           a.ord_cons == b.ord_cons;
}

void hungarian_oracle(Check& c) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 7);
    std::uniform_int_distribution<int> small(0, 9);
    std::uniform_real_distribution<double> real(-5.0, 5.0);
    const auto start = std::chrono::steady_clock::now();
    for (int k = 0; k < 500; ++k) {
        const int n = dim(rng);
        const int m = k % 3 == 0 ? n : dim(rng);
        Eigen::MatrixXd cost(n, m);
        for (Eigen::Index i = 0; i < cost.size(); ++i) {
            cost.data()[i] = k % 2 ? static_cast<double>(small(rng)) : real(rng);
        }
        const auto a = hungarian(cost);
        const double expected = oracle::brute_force_assignment(cost);
        double row_order = 0.0;
        for (const auto& [i, j] : a.pairs) {
            row_order += cost(i, j);
        }
        c.require(a.pairs.size() == static_cast<std::size_t>(std::min(n, m)),
                  "matrix " + std::to_string(k) + ": assignment not of full size");
        c.require(row_order == expected, "matrix " + std::to_string(k) + ": cost " + std::to_string(row_order) +
                                             " vs oracle " + std::to_string(expected));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.require(secs < 10.0, "took " + std::to_string(secs) + " s");
}

void alignment_laws(Check& c) {
    oracle::TrajectoryGenerator gen(7);
    BuiltinEncoder enc;
    const AlignmentConfig cfg;
    int done = 0;
    while (done < 200) {
        const auto gt = gen.trajectory();
        const auto pred = gen.perturb(gt);
        if (!within_limits(pred) || pred.flat_calls().empty()) {
            continue;
        }
        ++done;
        const std::string tag = "pair " + std::to_string(done) + ": ";
        const auto r = score_sample(gt, pred, cfg, enc, {});
        const auto sim = similarity_matrix(gt.flat_calls(), pred.flat_calls(), enc, {});
        std::set<std::size_t> rows;
        std::set<std::size_t> cols;
        for (const auto& m : r.matches.matches) {
            c.require(rows.insert(m.gt_index).second && cols.insert(m.pred_index).second, tag + "not one-to-one");
            c.require(m.similarity >= cfg.tau_weak, tag + "match below tau_weak");
            c.require(m.similarity == sim(static_cast<Eigen::Index>(m.gt_index), static_cast<Eigen::Index>(m.pred_index)),
                      tag + "match similarity differs from S");
            c.require(gt.flat_calls()[m.gt_index].tool == pred.flat_calls()[m.pred_index].tool, tag + "cross-tool match");
        }
        const auto best = oracle::brute_force_alignment(gt.flat_calls(), pred.flat_calls(), sim.values, cfg.tau_weak);
        c.require(best.cardinality == r.matches.size(), tag + "not maximum cardinality");

        const auto shuffled = gen.shuffle_within_steps(pred);
        const auto s = score_sample(gt, shuffled, cfg, enc, {});
        c.require(keyed(r, pred) == keyed(s, shuffled), tag + "M changed under a within-step shuffle");
        c.require(same_metrics(r, s), tag + "metrics changed under a within-step shuffle");
    }
}

void perfect_identity(Check& c) {
    oracle::TrajectoryGenerator gen(11);
    BuiltinEncoder enc;
    for (int k = 0; k < 50; ++k) {
        const auto t = gen.trajectory();
        const auto r = score_sample(t, t, {}, enc, {});
        const bool ones = r.recall == 1.0 && r.precision == 1.0 && r.arg_sim == 1.0 && r.step_coh == 1.0 &&
                          r.merge_pur == 1.0 && r.ord_cons == 1.0;
        c.require(ones, "trajectory " + std::to_string(k) + " not scored 1.0 everywhere");
    }
}

void golden_fixture(Check& c) {
    const auto gt = load_trajectory(kFixtures / "golden_ref.json");
    const auto pred = load_trajectory(kFixtures / "golden_pred.json");
    BuiltinEncoder enc;
    const auto r = score_sample(gt, pred, {}, enc, {});
    // hand evaluation: W = [[1,0,0],[0,1,1],[0,2,0]] over the matched steps
    Eigen::MatrixXd w(3, 3);
    w << 1, 0, 0,
         0, 1, 1,
         0, 2, 0;
    const double h = (1.0 / 5.0) * 0.0 + (3.0 / 5.0) * (-(1.0 / 3.0) * std::log(1.0 / 3.0) - (2.0 / 3.0) * std::log(2.0 / 3.0)) +
                     (1.0 / 5.0) * 0.0;
    const double mp = 1.0 - h / std::log(3.0);
    c.require(std::abs(r.step_coh - 0.8) <= 1e-9, "StepCoh " + std::to_string(r.step_coh));
    c.require(std::abs(r.ord_cons - 2.0 / 3.0) <= 1e-9, "OrdCons " + std::to_string(r.ord_cons));
    c.require(std::abs(r.merge_pur - mp) <= 1e-9, "MergePur " + std::to_string(r.merge_pur));
    c.require(std::abs(merge_purity_from_weights(w).value - mp) <= 1e-9, "MergePur of the hand table");
}

void threshold_defaults(Check& c) {
    const RunConfig cfg;
    c.require(cfg.alignment.tau_strong == 0.8 && cfg.alignment.tau_weak == 0.6, "defaults are not (0.8, 0.6)");
    const auto echo = to_json(cfg);
    c.require(echo["alignment"]["tau_strong"] == 0.8 && echo["alignment"]["tau_weak"] == 0.6, "config echo");

    std::vector<ToolCall> calls = {{"a/x", json{{"i", 0}}, 0, 0}, {"a/x", json{{"i", 1}}, 0, 1}};
    SimilarityMatrix s;
    s.values.resize(2, 2);
    s.values << 0.6, 0.0,
                0.0, std::nextafter(0.6, 0.0);
    const auto m = align(calls, calls, s, cfg.alignment);
    c.require(m.size() == 1 && m.matches[0].similarity == 0.6, "S = 0.6 must match, just below must not");

    MatchSet strong;
    strong.matches = {{0, 0, 0.8}, {1, 1, std::nextafter(0.8, 0.0)}};
    const auto arg = arg_similarity(strong, cfg.alignment.tau_strong);
    c.require(arg && *arg == 0.8, "S = 0.8 must count as strong, just below must not");
}

void trimmed_mean_law(Check& c) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        std::array<double, 4> s;
        for (auto& x : s) {
            x = k % 4 == 0 ? std::round(u(rng) * 4.0) / 4.0 : u(rng);
        }
        auto sorted = s;
        std::sort(sorted.begin(), sorted.end());
        const double t = trimmed_mean(s);
        c.require(t >= sorted[1] && t <= sorted[2], "tuple " + std::to_string(k) + " outside [2nd, 3rd]");
        auto perm = s;
        std::sort(perm.begin(), perm.end());
        do {
            c.require(trimmed_mean(perm) == t, "tuple " + std::to_string(k) + " not permutation invariant");
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    const std::array<double, 4> anchor = {0.2, 0.4, 0.6, 0.8};
    c.require(trimmed_mean(anchor) == 0.5, "{0.2,0.4,0.6,0.8} -> " + std::to_string(trimmed_mean(anchor)));
}

void merge_purity_range(Check& c) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> steps(1, 6);
    std::uniform_int_distribution<int> count(0, 12);
    std::uniform_real_distribution<double> sim(0.6, 1.0);
    for (int k = 0; k < 500; ++k) {
        const std::size_t g = steps(rng);
        const std::size_t p = steps(rng);
        std::uniform_int_distribution<std::size_t> ga(0, g - 1);
        std::uniform_int_distribution<std::size_t> pa(0, p - 1);
        std::vector<StepPair> pairs;
        for (int i = count(rng); i > 0; --i) {
            pairs.push_back({ga(rng), pa(rng), sim(rng)});
        }
        const auto d = merge_purity_from_weights(alignment_weights(pairs, g, p));
        const double log_g = d.active_gt_steps > 1 ? std::log(static_cast<double>(d.active_gt_steps)) : 0.0;
        c.require(d.conditional_entropy >= 0.0 && d.conditional_entropy <= log_g,
                  "set " + std::to_string(k) + ": H outside [0, log G_act]");
        c.require(d.value >= 0.0 && d.value <= 1.0, "set " + std::to_string(k) + ": MergePur outside [0,1]");
    }
}

void outcome_taxonomy(Check& c) {
    const ToolRegistry registry({"a/x", "a/y", "b/z"}, {{"b/z", {"bad path"}}});
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> coin(0, 1);
    const std::vector<std::optional<std::string>> names = {std::nullopt, "", "a/x", "b/z", "c/w", "nope"};
    const std::vector<std::optional<json>> args = {std::nullopt, json::object(), json{{"k", 1}}, json::array(), json(3)};
    const std::vector<std::optional<int>> statuses = {std::nullopt, 200, 400, 404, 500};
    const std::vector<std::optional<std::string>> errors = {std::nullopt, "Invalid Argument: k", "BAD PATH", "oops"};
    std::vector<CallLogEntry> log;
    std::uniform_int_distribution<std::size_t> ni(0, names.size() - 1), ai(0, args.size() - 1),
        si(0, statuses.size() - 1), ei(0, errors.size() - 1);
    for (int k = 0; k < 2000; ++k) {
        log.push_back({"", names[ni(rng)], args[ai(rng)], statuses[si(rng)], errors[ei(rng)]});
    }
    const auto d = outcome_distribution(log, registry);
    std::size_t total = 0;
    double frac = 0.0;
    for (std::size_t i = 0; i < kOutcomeCount; ++i) {
        total += d.counts[i];
        frac += d.fractions[i];
    }
    c.require(total == log.size(), "counts do not cover every entry exactly once");
    c.require(std::abs(frac - 1.0) <= 1e-12, "fractions sum to " + std::to_string(frac));

    // every pair of simultaneously triggered rules resolves to the earlier one
    struct Trigger {
        bool illegal, unknown, invalid, missing;
    };
    for (int mask = 0; mask < 16; ++mask) {
        const Trigger t{(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0};
        CallLogEntry e{"", t.unknown ? "c/w" : "a/x", t.illegal ? std::optional<json>() : json::object(),
                       t.missing ? 404 : 200,
                       t.invalid ? std::optional<std::string>("invalid argument") : std::nullopt};
        const Outcome want = t.illegal   ? Outcome::IllegalFormat
                             : t.unknown ? Outcome::UnknownTool
                             : t.invalid ? Outcome::InvalidArguments
                             : t.missing ? Outcome::SuccessResourceNotFound
                                         : Outcome::Success;
        c.require(classify_call(e, registry) == want, "collision mask " + std::to_string(mask));
        // the same collisions with invalid arguments signalled by status 400
        if (t.invalid && !t.missing) {
            e.tool_error_text.reset();
            e.transport_status = 400;
            c.require(classify_call(e, registry) == want, "collision mask " + std::to_string(mask) + " via 400");
        }
    }
}

void determinism(Check& c) {
    const auto dir = fs::temp_directory_path() / "trajalign_acceptance";
    fs::create_directories(dir);
    auto run = [&](int k, std::size_t jobs) {
        BatchOptions opts;
        opts.pred_dir = kFixtures / "corpus/pred";
        opts.ref_dir = kFixtures / "corpus/ref";
        opts.out = dir / ("run" + std::to_string(k) + ".json");
        opts.csv_out = dir / ("run" + std::to_string(k) + ".csv");
        RunConfig cfg;
        cfg.jobs = jobs;
        std::ostringstream out, err;
        c.require(cmd_batch(opts, cfg, out, err) == 0, "batch failed: " + err.str());
    };
    auto read = [&](const std::string& name) {
        std::ifstream in(dir / name, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    run(0, 1);
    run(1, 1);
    run(2, 4);
    c.require(!read("run0.json").empty() && !read("run0.csv").empty(), "no output written");
    c.require(read("run0.json") == read("run1.json"), "JSON differs between runs");
    c.require(read("run0.csv") == read("run1.csv"), "CSV differs between runs");
    auto without_jobs = [&](const std::string& name) {
        auto doc = json::parse(read(name));
        doc["config"].erase("jobs");
        return doc.dump();
    };
    c.require(without_jobs("run0.json") == without_jobs("run2.json"), "results depend on the job count");
}

void prompt_fidelity(Check& c) {
    const auto task = render_prompt(PromptTemplate::TaskCompletion, {});
    const auto grounding = render_prompt(PromptTemplate::InformationGrounding, {});
    c.require(task.find("Planning (0-3)") != std::string::npos, "task_completion lacks \"Planning (0-3)\"");
    c.require(grounding.find("output only a scalar") != std::string::npos,
              "information_grounding lacks \"output only a scalar\"");
}

}  // namespace

int main() {
    report("hungarian_oracle_equivalence", hungarian_oracle);
    report("alignment_laws", alignment_laws);
    report("perfect_match_identity", perfect_identity);
    report("golden_split_merge_swap", golden_fixture);
    report("threshold_defaults_and_boundaries", threshold_defaults);
    report("trimmed_mean", trimmed_mean_law);
    report("merge_purity_range", merge_purity_range);
    report("outcome_taxonomy", outcome_taxonomy);
    report("batch_determinism", determinism);
    report("prompt_fidelity", prompt_fidelity);
    std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
