#include "trajalign/alignment.hpp"

#include <algorithm>

#include "trajalign/errors.hpp"
#include "trajalign/hungarian.hpp"

namespace trajalign {

void AlignmentConfig::validate() const {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(tau_weak) || !in_unit(tau_strong)) {
        throw ConfigError("thresholds must lie in [0,1] (tau_weak=" + std::to_string(tau_weak) +
                          ", tau_strong=" + std::to_string(tau_strong) + ")");
    }
    if (tau_weak > tau_strong) {
        throw ConfigError("tau_weak (" + std::to_string(tau_weak) + ") exceeds tau_strong (" +
                          std::to_string(tau_strong) + ")");
    }
    if (!(lambda_pen > 1.0)) {
        throw ConfigError("lambda_pen must be > 1, got " + std::to_string(lambda_pen));
    }
}

nlohmann::json to_json(const AlignmentConfig& cfg) {
    return {{"tau_weak", cfg.tau_weak}, {"tau_strong", cfg.tau_strong}, {"lambda_pen", cfg.lambda_pen}};
}

std::map<std::string, Bucket> bucket_indices(const std::vector<ToolCall>& gt_calls,
                                             const std::vector<ToolCall>& pred_calls) {
    std::map<std::string, Bucket> buckets;
    for (std::size_t i = 0; i < gt_calls.size(); ++i) {
        buckets[gt_calls[i].tool].gt.push_back(i);
    }
    for (std::size_t j = 0; j < pred_calls.size(); ++j) {
        buckets[pred_calls[j].tool].pred.push_back(j);
    }
    return buckets;
}

MatchSet align(const std::vector<ToolCall>& gt_calls,
               const std::vector<ToolCall>& pred_calls,
               const SimilarityMatrix& similarity,
               const AlignmentConfig& cfg) {
    cfg.validate();
    if (similarity.rows() != static_cast<Eigen::Index>(gt_calls.size()) ||
        similarity.cols() != static_cast<Eigen::Index>(pred_calls.size())) {
        throw ShapeError("similarity matrix is " + std::to_string(similarity.rows()) + "x" +
                         std::to_string(similarity.cols()) + ", expected " + std::to_string(gt_calls.size()) +
                         "x" + std::to_string(pred_calls.size()));
    }

    MatchSet out;
    for (const auto& [tool, bucket] : bucket_indices(gt_calls, pred_calls)) {
        if (bucket.gt.empty() || bucket.pred.empty()) {
            continue;
        }
        const auto n = static_cast<Eigen::Index>(bucket.gt.size());
        const auto m = static_cast<Eigen::Index>(bucket.pred.size());

        // columns ordered by similarity profile, then global index
        auto column = [&](std::size_t j) {
            std::vector<double> col(bucket.gt.size());
            for (std::size_t r = 0; r < bucket.gt.size(); ++r) {
                col[r] = similarity(static_cast<Eigen::Index>(bucket.gt[r]), static_cast<Eigen::Index>(j));
            }
            return col;
        };
        std::vector<std::size_t> pred = bucket.pred;
        std::stable_sort(pred.begin(), pred.end(), [&](std::size_t a, std::size_t b) { return column(a) > column(b); });

        Eigen::MatrixXd sub(n, m);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < m; ++c) {
                sub(r, c) = similarity(static_cast<Eigen::Index>(bucket.gt[r]), static_cast<Eigen::Index>(pred[c]));
            }
        }
        const Eigen::Index k = std::max(n, m);
        Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(k, k, cfg.lambda_pen);
        cost.topLeftCorner(n, m) = cost_matrix(sub, cfg);

        for (const auto& [r, c] : hungarian(cost).pairs) {
            if (r >= n || c >= m) {
                continue;  // dummy row or column
            }
            const double s = sub(r, c);
            if (s >= cfg.tau_weak) {
                out.matches.push_back({bucket.gt[r], pred[c], s});
            }
        }
    }
    std::sort(out.matches.begin(), out.matches.end(),
              [](const Match& a, const Match& b) { return a.gt_index < b.gt_index; });
    return out;
}

}  // namespace trajalign
