#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "trajalign/errors.hpp"
#include "trajalign/serialization.hpp"
#include "trajalign/trajectory.hpp"

namespace trajalign {

using Vector = Eigen::VectorXd;

/// Embeddings of a batch, one row per input text.
using EmbeddingBatch = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Cosine similarity <x,y> / (|x| |y|), clamped to [-1, 1].
///
/// Bitwise-identical inputs return exactly 1. Throws DimensionError on a
/// length mismatch and ZeroNormError when either vector has zero norm.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar cosine(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
    using Scalar = typename DerivedX::Scalar;
    if (x.size() != y.size()) {
        throw DimensionError("cosine: dimension mismatch " + std::to_string(x.size()) + " vs " +
                             std::to_string(y.size()));
    }
    const Scalar nx = x.norm();
    const Scalar ny = y.norm();
    if (nx == Scalar(0) || ny == Scalar(0)) {
        throw ZeroNormError("cosine: zero-norm vector");
    }
    if (x == y) {
        return Scalar(1);
    }
    const Scalar c = x.dot(y) / (nx * ny);
    return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Abstract text encoder. Implementations must map equal strings to equal
/// vectors within one run.
class EncoderPort {
public:
    virtual ~EncoderPort() = default;

    virtual std::size_t dim() const = 0;

    /// One row per text, `dim()` columns.
    virtual EmbeddingBatch encode_batch(const std::vector<std::string>& texts) = 0;

    /// Human-readable identity recorded in reports ("builtin-hash3/512").
    virtual std::string identity() const = 0;
};

/// Deterministic fallback encoder: L2-normalised signed-hash bag of byte
/// 3-grams. Bucket 0 is reserved for the empty string.
Vector builtin_encode(const std::string& text, std::size_t dim);

class BuiltinEncoder final : public EncoderPort {
public:
    static constexpr std::size_t kDefaultDim = 512;

    explicit BuiltinEncoder(std::size_t dim = kDefaultDim);

    std::size_t dim() const override { return dim_; }
    EmbeddingBatch encode_batch(const std::vector<std::string>& texts) override;
    std::string identity() const override;

private:
    std::size_t dim_;
};

/// Memoises another encoder per unique string. Thread-safe; the wrapped
/// encoder is only ever called under the lock.
class CachingEncoder final : public EncoderPort {
public:
    explicit CachingEncoder(std::shared_ptr<EncoderPort> inner) : inner_(std::move(inner)) {}

    std::size_t dim() const override { return inner_->dim(); }
    EmbeddingBatch encode_batch(const std::vector<std::string>& texts) override;
    std::string identity() const override { return inner_->identity(); }

    std::size_t cache_size() const;

private:
    std::shared_ptr<EncoderPort> inner_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Vector> cache_;
};

/// Build an encoder from a CLI spec: `builtin`, `builtin:<dim>`,
/// `exec:<shell command>` or `http:<url>`. External encoders are checked
/// against `external_dim`. The result is wrapped in a CachingEncoder.
std::shared_ptr<EncoderPort> make_encoder(const std::string& spec, std::size_t external_dim = 384);

struct SimilarityMatrix {
    /// rows index reference calls, cols index predicted calls
    Eigen::MatrixXd values;
    /// pairs mapped to 0 because one side embedded to the zero vector
    std::size_t zero_norm_pairs = 0;
    std::vector<std::string> warnings;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

/// Pairwise cosine similarity of serialised calls. Every unique serialised
/// string is encoded once, in a single batch. Errors from serialisation or
/// the encoder are re-raised with the offending call's coordinates.
SimilarityMatrix similarity_matrix(const std::vector<ToolCall>& gt_calls,
                                   const std::vector<ToolCall>& pred_calls,
                                   EncoderPort& encoder,
                                   const SerializationPolicy& policy);

}  // namespace trajalign
