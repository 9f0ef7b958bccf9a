#include <doctest.h>

#include <set>

#include "support/oracles.hpp"
#include "trajalign/alignment.hpp"
#include "trajalign/errors.hpp"
#include "trajalign/hungarian.hpp"

using namespace trajalign;
using nlohmann::json;

namespace {

std::vector<ToolCall> calls_of(const std::vector<std::string>& tools) {
    std::vector<ToolCall> out;
    for (std::size_t i = 0; i < tools.size(); ++i) {
        out.push_back(ToolCall{tools[i], json{{"i", i}}, 0, i});
    }
    return out;
}

SimilarityMatrix sim_of(Eigen::MatrixXd m) {
    SimilarityMatrix s;
    s.values = std::move(m);
    return s;
}

}  // namespace

TEST_CASE("hungarian small examples") {
    Eigen::MatrixXd c(2, 2);
    c << 0, 1, 1, 0;
    auto a = hungarian(c);
    CHECK(a.pairs == std::vector<std::pair<Eigen::Index, Eigen::Index>>{{0, 0}, {1, 1}});
    CHECK(a.cost == 0.0);

    Eigen::MatrixXd one(1, 1);
    one << 5;
    a = hungarian(one);
    CHECK(a.pairs.size() == 1);
    CHECK(a.cost == 5.0);

    CHECK(hungarian(Eigen::MatrixXd(0, 3)).pairs.empty());
    Eigen::MatrixXd bad(1, 1);
    bad << std::nan("");
    CHECK_THROWS_AS(hungarian(bad), DomainError);
}

TEST_CASE("hungarian ties resolve to the lexicographically smallest assignment") {
    const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 3);
    CHECK(hungarian(zeros).pairs == std::vector<std::pair<Eigen::Index, Eigen::Index>>{{0, 0}, {1, 1}, {2, 2}});
    Eigen::MatrixXd c(3, 3);
    c << 1, 0, 0,
         0, 1, 0,
         0, 0, 1;
    // optima: (1,2,0) and (2,0,1); the first is smaller
    CHECK(hungarian(c).pairs == std::vector<std::pair<Eigen::Index, Eigen::Index>>{{0, 1}, {1, 2}, {2, 0}});
}

TEST_CASE("hungarian rectangular inputs") {
    Eigen::MatrixXd wide(2, 4);
    wide << 4, 1, 3, 9,
            2, 0, 5, 1;
    auto a = hungarian(wide);
    CHECK(a.pairs.size() == 2);
    CHECK(a.cost == 2.0);
    CHECK(a.cost == oracle::brute_force_assignment(wide));

    Eigen::MatrixXd tall = wide.transpose();
    a = hungarian(tall);
    CHECK(a.pairs.size() == 2);
    CHECK(a.cost == 2.0);

    Eigen::MatrixXd neg(2, 3);
    neg << -1, -5, 2,
           -3, -4, 0;
    CHECK(hungarian(neg).cost == oracle::brute_force_assignment(neg));
}

TEST_CASE("hungarian matches exhaustive search on random 6x6 matrices") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 40; ++k) {
        Eigen::MatrixXd c(6, 6);
        for (Eigen::Index i = 0; i < 6; ++i) {
            for (Eigen::Index j = 0; j < 6; ++j) {
                c(i, j) = u(rng);
            }
        }
        const auto a = hungarian(c);
        CHECK(a.cost == oracle::brute_force_assignment(c));
        std::set<Eigen::Index> cols;
        for (const auto& [r, col] : a.pairs) {
            cols.insert(col);
        }
        CHECK(cols.size() == 6);
    }
}

TEST_CASE("hungarian works on float matrices and expressions") {
    Eigen::MatrixXf c(2, 2);
    c << 1.f, 2.f, 2.f, 1.f;
    CHECK(hungarian(c).cost == 2.f);
    Eigen::MatrixXd d = Eigen::MatrixXd::Ones(3, 3);
    CHECK(hungarian(d * 2.0).cost == 6.0);
}

TEST_CASE("buckets partition the calls by tool") {
    const auto gt = calls_of({"a/x", "b/x", "a/x"});
    const auto pred = calls_of({"b/x", "c/x"});
    const auto b = bucket_indices(gt, pred);
    REQUIRE(b.size() == 3);
    CHECK(b.at("a/x").gt == std::vector<std::size_t>{0, 2});
    CHECK(b.at("a/x").pred.empty());
    CHECK(b.at("b/x").gt == std::vector<std::size_t>{1});
    CHECK(b.at("b/x").pred == std::vector<std::size_t>{0});
    CHECK(b.at("c/x").gt.empty());
    CHECK(b.at("c/x").pred == std::vector<std::size_t>{1});

    const auto same = bucket_indices(calls_of({"a/x", "a/x"}), calls_of({"a/x"}));
    CHECK(same.size() == 1);
}

TEST_CASE("buckets cover every index exactly once") {
    oracle::TrajectoryGenerator gen(20);
    for (int k = 0; k < 20; ++k) {
        std::vector<ToolCall> gt, pred;
        for (int i = 0; i < 20; ++i) {
            (gen.unit() < 0.5 ? gt : pred).push_back(gen.trajectory(1, 1).flat_calls()[0]);
        }
        std::multiset<std::size_t> seen_gt, seen_pred;
        for (const auto& [tool, b] : bucket_indices(gt, pred)) {
            for (auto i : b.gt) {
                CHECK(gt[i].tool == tool);
                seen_gt.insert(i);
            }
            for (auto j : b.pred) {
                CHECK(pred[j].tool == tool);
                seen_pred.insert(j);
            }
        }
        CHECK(seen_gt.size() == gt.size());
        CHECK(std::set<std::size_t>(seen_gt.begin(), seen_gt.end()).size() == gt.size());
        CHECK(seen_pred.size() == pred.size());
        CHECK(std::set<std::size_t>(seen_pred.begin(), seen_pred.end()).size() == pred.size());
    }
}

TEST_CASE("cost matrix thresholding") {
    AlignmentConfig cfg;
    Eigen::MatrixXd s(1, 4);
    s << 1.0, 0.59, 0.6, 0.8;
    const Eigen::MatrixXd c = cost_matrix(s, cfg);
    CHECK(c(0, 0) == 0.0);
    CHECK(c(0, 1) == 1000.0);
    CHECK(c(0, 2) == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(c(0, 3) == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("config validation") {
    AlignmentConfig cfg;
    CHECK(cfg.tau_weak == 0.6);
    CHECK(cfg.tau_strong == 0.8);
    CHECK(cfg.lambda_pen == 1000.0);
    CHECK_NOTHROW(cfg.validate());
    cfg.tau_weak = 0.9;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lambda_pen = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.tau_strong = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    const auto gt = calls_of({"a/x"});
    AlignmentConfig inverted{0.9, 0.8, 1000.0};
    CHECK_THROWS_AS(align(gt, gt, sim_of(Eigen::MatrixXd::Ones(1, 1)), inverted), ConfigError);
}

TEST_CASE("identical trajectories align call to twin") {
    oracle::TrajectoryGenerator gen(8);
    BuiltinEncoder enc;
    for (int k = 0; k < 20; ++k) {
        const auto t = gen.trajectory();
        const auto s = similarity_matrix(t.flat_calls(), t.flat_calls(), enc, {});
        const auto m = align(t.flat_calls(), t.flat_calls(), s, {});
        CHECK(m.size() == t.call_count());
        for (const auto& x : m.matches) {
            CHECK(x.similarity == 1.0);
            CHECK(serialize_call(t.flat_calls()[x.gt_index], {}) == serialize_call(t.flat_calls()[x.pred_index], {}));
        }
    }
}

TEST_CASE("no credit across tools") {
    const std::vector<ToolCall> gt = {ToolCall{"a/x", {{"q", "same"}}, 0, 0}};
    const std::vector<ToolCall> pred = {ToolCall{"a/y", {{"q", "same"}}, 0, 0}};
    CHECK(align(gt, pred, sim_of(Eigen::MatrixXd::Ones(1, 1)), {}).empty());
}

TEST_CASE("hand-built 3x2 bucket equals the exhaustive optimum") {
    const auto gt = calls_of({"a/x", "a/x", "a/x"});
    const auto pred = calls_of({"a/x", "a/x"});
    Eigen::MatrixXd s(3, 2);
    s << 0.95, 0.70,
         0.90, 0.50,
         0.65, 0.62;
    // most pairs first: (0,1)+(1,0) = 1.60 beats (0,0)+(2,1) = 1.57
    const auto m = align(gt, pred, sim_of(s), {});
    REQUIRE(m.size() == 2);
    CHECK(m.matches[0] == Match{0, 1, 0.70});
    CHECK(m.matches[1] == Match{1, 0, 0.90});
    const auto best = oracle::brute_force_alignment(gt, pred, s, 0.6);
    CHECK(best.cardinality == 2);
    CHECK(best.similarity_sum == doctest::Approx(1.60));
}

TEST_CASE("threshold boundary is inclusive and penalty pairs are dropped") {
    const auto gt = calls_of({"a/x", "a/x"});
    const auto pred = calls_of({"a/x", "a/x"});
    Eigen::MatrixXd s(2, 2);
    s << 0.6, 0.1,
         0.1, 0.5999999;
    const auto m = align(gt, pred, sim_of(s), {});
    REQUIRE(m.size() == 1);
    CHECK(m.matches[0] == Match{0, 0, 0.6});
}

TEST_CASE("shape mismatch") {
    const auto gt = calls_of({"a/x"});
    CHECK_THROWS_AS(align(gt, gt, sim_of(Eigen::MatrixXd::Ones(2, 1)), {}), ShapeError);
}

TEST_CASE("alignment agrees with the exhaustive oracle on random buckets") {
    oracle::TrajectoryGenerator gen(31);
    BuiltinEncoder enc;
    int nontrivial = 0;
    for (int k = 0; k < 150; ++k) {
        const auto gt = gen.trajectory(3, 3);
        const auto pred = gen.perturb(gt);
        const auto s = similarity_matrix(gt.flat_calls(), pred.flat_calls(), enc, {});
        const auto m = align(gt.flat_calls(), pred.flat_calls(), s, {});
        const auto best = oracle::brute_force_alignment(gt.flat_calls(), pred.flat_calls(), s.values, 0.6);
        double sum = 0.0;
        for (const auto& x : m.matches) {
            sum += x.similarity;
        }
        CHECK(m.size() == best.cardinality);
        CHECK(sum == doctest::Approx(best.similarity_sum).epsilon(1e-12));
        if (m.size() > 1 && m.size() < gt.call_count()) {
            ++nontrivial;
        }
    }
    CHECK(nontrivial > 20);
}

TEST_CASE("lowering tau_weak never shrinks the match set") {
    oracle::TrajectoryGenerator gen(41);
    BuiltinEncoder enc;
    for (int k = 0; k < 60; ++k) {
        const auto gt = gen.trajectory();
        const auto pred = gen.perturb(gt);
        const auto s = similarity_matrix(gt.flat_calls(), pred.flat_calls(), enc, {});
        std::size_t prev = 0;
        for (double tau : {0.8, 0.7, 0.6, 0.5, 0.3}) {
            const auto m = align(gt.flat_calls(), pred.flat_calls(), s, AlignmentConfig{tau, 0.8, 1000.0});
            CHECK(m.size() >= prev);
            prev = m.size();
        }
    }
}

TEST_CASE("step agnosticism: moving calls between steps leaves M unchanged") {
    oracle::TrajectoryGenerator gen(51);
    BuiltinEncoder enc;
    for (int k = 0; k < 40; ++k) {
        const auto gt = gen.trajectory();
        const auto pred = gen.perturb(gt);
        auto flat = pred.flat_calls();
        // same flattened order, every call in its own step
        std::vector<std::vector<ToolCall>> singles;
        for (const auto& c : flat) {
            singles.push_back({c});
        }
        const auto split = oracle::TrajectoryGenerator::rebuild(singles);
        const auto s1 = similarity_matrix(gt.flat_calls(), pred.flat_calls(), enc, {});
        const auto s2 = similarity_matrix(gt.flat_calls(), split.flat_calls(), enc, {});
        CHECK(s1.values == s2.values);
        CHECK(align(gt.flat_calls(), pred.flat_calls(), s1, {}) == align(gt.flat_calls(), split.flat_calls(), s2, {}));
    }
}
