#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "trajalign/embedding.hpp"
#include "trajalign/trajectory.hpp"

namespace trajalign {

struct AlignmentConfig {
    /// screening threshold: pairs below it may never match
    double tau_weak = 0.6;
    /// confidence threshold used by argument similarity
    double tau_strong = 0.8;
    /// cost of a forbidden (sub-threshold) cell
    double lambda_pen = 1000.0;

    /// Throws ConfigError unless 0 <= tau_weak <= tau_strong <= 1 and
    /// lambda_pen > 1.
    void validate() const;
};

nlohmann::json to_json(const AlignmentConfig& cfg);

struct Match {
    std::size_t gt_index = 0;    ///< global index into the flattened reference calls
    std::size_t pred_index = 0;  ///< global index into the flattened predicted calls
    double similarity = 0.0;

    friend bool operator==(const Match&, const Match&) = default;
};

/// One-to-one correspondences, sorted by gt_index.
struct MatchSet {
    std::vector<Match> matches;

    std::size_t size() const noexcept { return matches.size(); }
    bool empty() const noexcept { return matches.empty(); }
    friend bool operator==(const MatchSet&, const MatchSet&) = default;
};

struct Bucket {
    std::vector<std::size_t> gt;    ///< I_k
    std::vector<std::size_t> pred;  ///< J_k
};

/// Partition call indices by qualified tool name. Tools seen on one side
/// only produce a one-sided bucket. Map order (by tool name) is the
/// deterministic bucket order.
std::map<std::string, Bucket> bucket_indices(const std::vector<ToolCall>& gt_calls,
                                             const std::vector<ToolCall>& pred_calls);

/// Thresholded cost: 1 - S where S >= tau_weak, lambda_pen elsewhere.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
cost_matrix(const Eigen::MatrixBase<Derived>& similarity, const AlignmentConfig& cfg) {
    using Scalar = typename Derived::Scalar;
    const Scalar weak = static_cast<Scalar>(cfg.tau_weak);
    const Scalar pen = static_cast<Scalar>(cfg.lambda_pen);
    return similarity.unaryExpr([weak, pen](Scalar s) { return s >= weak ? Scalar(1) - s : pen; });
}

/// Bucketed assignment: per tool bucket, pad the thresholded cost matrix
/// to square with lambda_pen dummies, solve it, and keep only pairs whose
/// similarity clears tau_weak.
MatchSet align(const std::vector<ToolCall>& gt_calls,
               const std::vector<ToolCall>& pred_calls,
               const SimilarityMatrix& similarity,
               const AlignmentConfig& cfg);

}  // namespace trajalign
