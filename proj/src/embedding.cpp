#include "trajalign/embedding.hpp"

#include <cstdint>
#include <sstream>

namespace trajalign {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
// Fixed salt so bucket layout never depends on the process.
constexpr std::uint64_t kSalt = 0x9e3779b97f4a7c15ULL;

std::uint64_t hash_gram(std::string_view gram) {
    std::uint64_t h = kFnvOffset ^ kSalt;
    for (unsigned char c : gram) {
        h ^= c;
        h *= kFnvPrime;
    }
    // final avalanche (splitmix64 finaliser)
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebULL;
    h ^= h >> 31;
    return h;
}

}  // namespace

Vector builtin_encode(const std::string& text, std::size_t dim) {
    if (dim < 16) {
        throw DimensionError("builtin encoder needs dim >= 16, got " + std::to_string(dim));
    }
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim));
    if (text.empty()) {
        v(0) = 1.0;
        return v;
    }
    const std::string_view s(text);
    const std::size_t n = s.size() < 3 ? 1 : s.size() - 2;
    const std::size_t width = s.size() < 3 ? s.size() : 3;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t h = hash_gram(s.substr(i, width));
        const auto bucket = static_cast<Eigen::Index>(1 + (h >> 1) % (dim - 1));
        v(bucket) += (h & 1U) ? 1.0 : -1.0;
    }
    const double norm = v.norm();
    if (norm == 0.0) {
        // every gram cancelled out; fall back to the reserved bucket
        v.setZero();
        v(0) = 1.0;
        return v;
    }
    return v / norm;
}

BuiltinEncoder::BuiltinEncoder(std::size_t dim) : dim_(dim) {
    if (dim_ < 16) {
        throw DimensionError("builtin encoder needs dim >= 16, got " + std::to_string(dim_));
    }
}

EmbeddingBatch BuiltinEncoder::encode_batch(const std::vector<std::string>& texts) {
    EmbeddingBatch out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = builtin_encode(texts[i], dim_).transpose();
    }
    return out;
}

std::string BuiltinEncoder::identity() const {
    return "builtin-hash3/" + std::to_string(dim_);
}

EmbeddingBatch CachingEncoder::encode_batch(const std::vector<std::string>& texts) {
    std::lock_guard lock(mutex_);
    std::vector<std::string> misses;
    for (const auto& t : texts) {
        if (!cache_.contains(t) && std::find(misses.begin(), misses.end(), t) == misses.end()) {
            misses.push_back(t);
        }
    }
    if (!misses.empty()) {
        EmbeddingBatch fresh = inner_->encode_batch(misses);
        if (fresh.rows() != static_cast<Eigen::Index>(misses.size()) ||
            fresh.cols() != static_cast<Eigen::Index>(inner_->dim())) {
            throw EncoderError("encoder returned a " + std::to_string(fresh.rows()) + "x" +
                               std::to_string(fresh.cols()) + " batch for " + std::to_string(misses.size()) +
                               " texts of dim " + std::to_string(inner_->dim()));
        }
        for (std::size_t i = 0; i < misses.size(); ++i) {
            cache_.emplace(misses[i], fresh.row(static_cast<Eigen::Index>(i)).transpose());
        }
    }
    EmbeddingBatch out(static_cast<Eigen::Index>(texts.size()), static_cast<Eigen::Index>(inner_->dim()));
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = cache_.at(texts[i]).transpose();
    }
    return out;
}

std::size_t CachingEncoder::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

SimilarityMatrix similarity_matrix(const std::vector<ToolCall>& gt_calls,
                                   const std::vector<ToolCall>& pred_calls,
                                   EncoderPort& encoder,
                                   const SerializationPolicy& policy) {
    auto coord = [](const char* side, std::size_t i, const ToolCall& c) {
        std::ostringstream os;
        os << side << " call " << i << " (step " << c.step_index << ", slot " << c.slot_index << ", "
           << c.tool << "): ";
        return os.str();
    };

    // unique serialised strings, first-appearance order
    std::vector<std::string> texts;
    std::unordered_map<std::string, std::size_t> text_id;
    std::vector<std::size_t> gt_id(gt_calls.size());
    std::vector<std::size_t> pred_id(pred_calls.size());
    auto intern = [&](const char* side, std::size_t i, const ToolCall& c) {
        std::string s;
        try {
            s = serialize_call(c, policy);
        } catch (const Error& e) {
            e.rethrow_with(coord(side, i, c));
        }
        auto [it, inserted] = text_id.emplace(s, texts.size());
        if (inserted) {
            texts.push_back(std::move(s));
        }
        return it->second;
    };
    for (std::size_t i = 0; i < gt_calls.size(); ++i) {
        gt_id[i] = intern("gt", i, gt_calls[i]);
    }
    for (std::size_t j = 0; j < pred_calls.size(); ++j) {
        pred_id[j] = intern("pred", j, pred_calls[j]);
    }

    SimilarityMatrix out;
    out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(gt_calls.size()),
                                       static_cast<Eigen::Index>(pred_calls.size()));
    if (gt_calls.empty() || pred_calls.empty()) {
        return out;
    }

    EmbeddingBatch emb;
    try {
        emb = encoder.encode_batch(texts);
    } catch (const Error& e) {
        e.rethrow_with("encoding " + std::to_string(texts.size()) + " serialized calls (gt 0.." +
                       std::to_string(gt_calls.size() - 1) + ", pred 0.." + std::to_string(pred_calls.size() - 1) +
                       "): ");
    }
    if (emb.rows() != static_cast<Eigen::Index>(texts.size()) ||
        emb.cols() != static_cast<Eigen::Index>(encoder.dim())) {
        throw EncoderError("encoder returned a " + std::to_string(emb.rows()) + "x" + std::to_string(emb.cols()) +
                           " batch, expected " + std::to_string(texts.size()) + "x" +
                           std::to_string(encoder.dim()));
    }
    auto check_finite = [&](const char* side, const std::vector<ToolCall>& calls, const std::vector<std::size_t>& ids) {
        for (std::size_t i = 0; i < calls.size(); ++i) {
            if (!emb.row(static_cast<Eigen::Index>(ids[i])).allFinite()) {
                throw EncoderError(coord(side, i, calls[i]) + "non-finite embedding component");
            }
        }
    };
    check_finite("gt", gt_calls, gt_id);
    check_finite("pred", pred_calls, pred_id);

    std::vector<double> norms(texts.size());
    for (std::size_t t = 0; t < texts.size(); ++t) {
        norms[t] = emb.row(static_cast<Eigen::Index>(t)).norm();
    }
    for (std::size_t i = 0; i < gt_calls.size(); ++i) {
        if (norms[gt_id[i]] == 0.0) {
            out.warnings.push_back(coord("gt", i, gt_calls[i]) + "zero-norm embedding, similarities set to 0");
        }
    }
    for (std::size_t j = 0; j < pred_calls.size(); ++j) {
        if (norms[pred_id[j]] == 0.0) {
            out.warnings.push_back(coord("pred", j, pred_calls[j]) + "zero-norm embedding, similarities set to 0");
        }
    }

    for (std::size_t i = 0; i < gt_calls.size(); ++i) {
        const auto xi = emb.row(static_cast<Eigen::Index>(gt_id[i]));
        for (std::size_t j = 0; j < pred_calls.size(); ++j) {
            double s = 0.0;
            if (gt_id[i] == pred_id[j]) {
                s = norms[gt_id[i]] == 0.0 ? 0.0 : 1.0;
            } else if (norms[gt_id[i]] == 0.0 || norms[pred_id[j]] == 0.0) {
                s = 0.0;
            } else {
                s = cosine(xi, emb.row(static_cast<Eigen::Index>(pred_id[j])));
            }
            if (norms[gt_id[i]] == 0.0 || norms[pred_id[j]] == 0.0) {
                ++out.zero_norm_pairs;
            }
            out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
        }
    }
    return out;
}

}  // namespace trajalign
