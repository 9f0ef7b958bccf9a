// Encoders backed by an external service: a child process speaking
// line-delimited JSON over stdin/stdout, or an HTTP endpoint. Both use the
// same request/response bodies:
//   request  {"texts": [string...]}
//   response {"vectors": [[float...]...], "dim": int}

#include <csignal>
#include <cstdio>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "trajalign/embedding.hpp"

#include <httplib.h>

namespace trajalign {

namespace {

EmbeddingBatch decode_response(const std::string& body, std::size_t n_texts, std::size_t dim) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw EncoderError("malformed encoder response (not a JSON object)");
    }
    auto vit = j.find("vectors");
    if (vit == j.end() || !vit->is_array()) {
        throw EncoderError("malformed encoder response: missing 'vectors' array");
    }
    if (auto dit = j.find("dim"); dit != j.end()) {
        if (!dit->is_number_integer() || dit->get<long long>() != static_cast<long long>(dim)) {
            throw EncoderError("encoder reports dim " + dit->dump() + ", expected " + std::to_string(dim));
        }
    }
    if (vit->size() != n_texts) {
        throw EncoderError("encoder returned " + std::to_string(vit->size()) + " vectors for " +
                           std::to_string(n_texts) + " texts");
    }
    EmbeddingBatch out(static_cast<Eigen::Index>(n_texts), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n_texts; ++i) {
        const auto& row = (*vit)[i];
        if (!row.is_array() || row.size() != dim) {
            throw EncoderError("vector " + std::to_string(i) + " has wrong length (expected " +
                               std::to_string(dim) + ")");
        }
        for (std::size_t k = 0; k < dim; ++k) {
            if (!row[k].is_number()) {
                throw EncoderError("vector " + std::to_string(i) + " component " + std::to_string(k) +
                                   " is not a number");
            }
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
        }
    }
    return out;
}

class ExecEncoder final : public EncoderPort {
public:
    ExecEncoder(std::string command, std::size_t dim) : command_(std::move(command)), dim_(dim) {}

    ~ExecEncoder() override { stop(); }

    std::size_t dim() const override { return dim_; }
    std::string identity() const override { return "exec:" + command_ + "/" + std::to_string(dim_); }

    EmbeddingBatch encode_batch(const std::vector<std::string>& texts) override {
        std::lock_guard lock(mutex_);
        if (texts.empty()) {
            return EmbeddingBatch(0, static_cast<Eigen::Index>(dim_));
        }
        start();
        const std::string line = nlohmann::json{{"texts", texts}}.dump() + "\n";
        if (std::fputs(line.c_str(), to_child_) == EOF || std::fflush(to_child_) != 0) {
            stop();
            throw EncoderError("failed writing to encoder process '" + command_ + "'");
        }
        std::string reply;
        int ch;
        while ((ch = std::fgetc(from_child_)) != EOF && ch != '\n') {
            reply.push_back(static_cast<char>(ch));
        }
        if (ch == EOF && reply.empty()) {
            stop();
            throw EncoderError("encoder process '" + command_ + "' closed its output");
        }
        return decode_response(reply, texts.size(), dim_);
    }

private:
    void start() {
        if (pid_ > 0) {
            return;
        }
        int in_pipe[2];
        int out_pipe[2];
        if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
            throw EncoderError("pipe() failed");
        }
        std::signal(SIGPIPE, SIG_IGN);
        pid_ = fork();
        if (pid_ < 0) {
            throw EncoderError("fork() failed");
        }
        if (pid_ == 0) {
            dup2(in_pipe[0], STDIN_FILENO);
            dup2(out_pipe[1], STDOUT_FILENO);
            close(in_pipe[0]);
            close(in_pipe[1]);
            close(out_pipe[0]);
            close(out_pipe[1]);
            execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(in_pipe[0]);
        close(out_pipe[1]);
        to_child_ = fdopen(in_pipe[1], "w");
        from_child_ = fdopen(out_pipe[0], "r");
    }

    void stop() {
        if (to_child_) {
            std::fclose(to_child_);
            to_child_ = nullptr;
        }
        if (from_child_) {
            std::fclose(from_child_);
            from_child_ = nullptr;
        }
        if (pid_ > 0) {
            int status = 0;
            waitpid(pid_, &status, 0);
            pid_ = -1;
        }
    }

    std::string command_;
    std::size_t dim_;
    std::mutex mutex_;
    pid_t pid_ = -1;
    FILE* to_child_ = nullptr;
    FILE* from_child_ = nullptr;
};

class HttpEncoder final : public EncoderPort {
public:
    HttpEncoder(const std::string& url, std::size_t dim) : url_(url), dim_(dim) {
        // split "scheme://host[:port]" from the path
        auto scheme = url.find("://");
        auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        base_ = path_start == std::string::npos ? url : url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "" : url.substr(path_start);
        if (path_.empty() || path_ == "/") {
            path_ = "/encode";
        }
    }

    std::size_t dim() const override { return dim_; }
    std::string identity() const override { return "http:" + url_ + "/" + std::to_string(dim_); }

    EmbeddingBatch encode_batch(const std::vector<std::string>& texts) override {
        if (texts.empty()) {
            return EmbeddingBatch(0, static_cast<Eigen::Index>(dim_));
        }
        httplib::Client client(base_);
        client.set_connection_timeout(10);
        client.set_read_timeout(120);
        auto res = client.Post(path_, nlohmann::json{{"texts", texts}}.dump(), "application/json");
        if (!res) {
            throw EncoderError("POST " + url_ + " failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw EncoderError("POST " + url_ + " returned HTTP " + std::to_string(res->status));
        }
        return decode_response(res->body, texts.size(), dim_);
    }

private:
    std::string url_;
    std::string base_;
    std::string path_;
    std::size_t dim_;
};

}  // namespace

std::shared_ptr<EncoderPort> make_encoder(const std::string& spec, std::size_t external_dim) {
    std::shared_ptr<EncoderPort> inner;
    if (spec == "builtin") {
        inner = std::make_shared<BuiltinEncoder>();
    } else if (spec.rfind("builtin:", 0) == 0) {
        std::size_t dim = 0;
        try {
            dim = std::stoul(spec.substr(8));
        } catch (const std::exception&) {
            throw ConfigError("bad builtin encoder dim in '" + spec + "'");
        }
        inner = std::make_shared<BuiltinEncoder>(dim);
    } else if (spec.rfind("exec:", 0) == 0 && spec.size() > 5) {
        inner = std::make_shared<ExecEncoder>(spec.substr(5), external_dim);
    } else if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0) {
        inner = std::make_shared<HttpEncoder>(spec, external_dim);
    } else if (spec.rfind("http:", 0) == 0 && spec.size() > 5) {
        inner = std::make_shared<HttpEncoder>(spec.substr(5), external_dim);
    } else {
        throw ConfigError("unknown encoder spec '" + spec + "' (expected builtin|exec:<cmd>|http:<url>)");
    }
    return std::make_shared<CachingEncoder>(std::move(inner));
}

}  // namespace trajalign
