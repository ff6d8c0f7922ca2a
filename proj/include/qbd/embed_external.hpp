#pragma once

// Client for an out-of-process embedding service speaking line-delimited JSON:
//
//   {"op":"embed","id":N,"model":M,"texts":[...]}          -> {"id":N,"vectors":[[...],...]}
//   {"op":"score_pairs","id":N,"model":M,"pairs":[[a,b]]}   -> {"id":N,"scores":[...]}
//   failure                                                 -> {"id":N,"error":"..."}
//
// over either a child process's stdin/stdout or HTTP POST to a single endpoint.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "embed.hpp"
#include "error.hpp"

namespace qbd {

/// Sends one request object and returns the matching reply object.
class Transport {
public:
    virtual ~Transport() = default;
    virtual nlohmann::json roundtrip(const nlohmann::json& request) = 0;
};

class HttpTransport final : public Transport {
public:
    HttpTransport(std::string host, int port, std::string path = "/rpc",
                  std::chrono::milliseconds timeout = std::chrono::seconds(120))
        : client_(std::move(host), port), path_(std::move(path)) {
        const auto secs = static_cast<time_t>(timeout.count() / 1000);
        const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
        client_.set_connection_timeout(secs, usecs);
        client_.set_read_timeout(secs, usecs);
        client_.set_write_timeout(secs, usecs);
    }

    nlohmann::json roundtrip(const nlohmann::json& request) override {
        std::lock_guard lock(mutex_);
        auto res = client_.Post(path_, request.dump(), "application/json");
        if (!res) throw TransportError("embedding service unreachable: " + httplib::to_string(res.error()));
        if (res->status != 200 && res->body.empty())
            throw TransportError("embedding service returned HTTP " + std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed reply: ") + e.what());
        }
    }

private:
    httplib::Client client_;
    std::string path_;
    std::mutex mutex_;
};

/// Spawns `/bin/sh -c command` and exchanges one JSON line per request.
class StdioTransport final : public Transport {
public:
    explicit StdioTransport(const std::string& command, std::chrono::milliseconds timeout = std::chrono::seconds(120))
        : timeout_(timeout) {
        int to_child[2], from_child[2];
        if (pipe(to_child) != 0) throw TransportError("pipe() failed");
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw TransportError("pipe() failed");
        }
        pid_ = fork();
        if (pid_ < 0) throw TransportError("fork() failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
        // a dead child must surface as EPIPE, not kill us
        signal(SIGPIPE, SIG_IGN);
    }

    StdioTransport(const StdioTransport&) = delete;
    StdioTransport& operator=(const StdioTransport&) = delete;

    ~StdioTransport() override {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        if (pid_ > 0) {
            int status = 0;
            if (waitpid(pid_, &status, WNOHANG) == 0) {
                kill(pid_, SIGTERM);
                waitpid(pid_, &status, 0);
            }
        }
    }

    nlohmann::json roundtrip(const nlohmann::json& request) override {
        std::lock_guard lock(mutex_);
        const std::string line = request.dump() + "\n";
        std::size_t sent = 0;
        while (sent < line.size()) {
            const auto n = write(write_fd_, line.data() + sent, line.size() - sent);
            if (n <= 0) throw TransportError("embedding service closed its input");
            sent += static_cast<std::size_t>(n);
        }
        const auto reply = read_line();
        try {
            return nlohmann::json::parse(reply);
        } catch (const nlohmann::json::exception& e) {
            throw TransportError(std::string("malformed reply: ") + e.what());
        }
    }

private:
    std::string read_line() {
        const auto deadline = std::chrono::steady_clock::now() + timeout_;
        for (;;) {
            if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            const auto left =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw TransportError("embedding service timed out");
            pollfd pfd{read_fd_, POLLIN, 0};
            const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
            if (rc == 0) throw TransportError("embedding service timed out");
            if (rc < 0) throw TransportError("poll() failed");
            char chunk[65536];
            const auto n = read(read_fd_, chunk, sizeof chunk);
            if (n <= 0) throw TransportError("embedding service exited");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    std::chrono::milliseconds timeout_;
    std::string buffer_;
    std::mutex mutex_;
};

/// Provider backed by an external model service. Requests carry at most
/// `max_batch` (<= 64) items. Vectors are L2-normalized and pair scores
/// clamped to [0, 1] here, whatever the service returns. A handle dim of 0
/// is learned from the first reply.
class ExternalProvider final : public EmbeddingProvider {
public:
    static constexpr std::size_t kMaxBatch = 64;

    ExternalProvider(ProviderHandle handle, std::unique_ptr<Transport> transport, std::size_t max_batch = kMaxBatch,
                     std::size_t max_chars = 2000)
        : handle_(std::move(handle)), transport_(std::move(transport)),
          max_batch_(std::clamp<std::size_t>(max_batch, 1, kMaxBatch)), max_chars_(max_chars) {
        handle_.kind = ProviderKind::EXTERNAL;
    }

    const ProviderHandle& handle() const override { return handle_; }
    std::size_t max_chars() const override { return max_chars_; }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbedRole role) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (std::size_t begin = 0; begin < texts.size(); begin += max_batch_) {
            const auto batch = texts.subspan(begin, std::min(max_batch_, texts.size() - begin));
            nlohmann::json req{{"op", "embed"}, {"model", handle_.model_for(role)}, {"texts", batch}};
            const auto reply = call(std::move(req));
            if (!reply.contains("vectors") || !reply["vectors"].is_array() || reply["vectors"].size() != batch.size())
                throw TransportError("embed reply does not carry one vector per text");
            for (const auto& arr : reply["vectors"]) {
                std::vector<double> v;
                v.reserve(arr.size());
                for (const auto& x : arr) {
                    if (!x.is_number()) throw TransportError("embed reply holds a non-numeric value");
                    v.push_back(x.get<double>());
                }
                check_dim(v.size());
                out.push_back(normalized(v));
            }
        }
        return out;
    }

    std::vector<double> score(std::span<const std::pair<std::string, std::string>> pairs) override {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (std::size_t begin = 0; begin < pairs.size(); begin += max_batch_) {
            const auto batch = pairs.subspan(begin, std::min(max_batch_, pairs.size() - begin));
            auto arr = nlohmann::json::array();
            for (const auto& [a, b] : batch) arr.push_back({a, b});
            nlohmann::json req{{"op", "score_pairs"}, {"model", handle_.cross_model}, {"pairs", std::move(arr)}};
            const auto reply = call(std::move(req));
            if (!reply.contains("scores") || !reply["scores"].is_array() || reply["scores"].size() != batch.size())
                throw TransportError("score_pairs reply does not carry one score per pair");
            for (const auto& s : reply["scores"]) {
                if (!s.is_number()) throw TransportError("score_pairs reply holds a non-numeric score");
                const double v = s.get<double>();
                if (std::isnan(v)) throw TransportError("score_pairs reply holds NaN");
                out.push_back(std::clamp(v, 0.0, 1.0));
            }
        }
        return out;
    }

private:
    nlohmann::json call(nlohmann::json request) {
        const std::uint64_t id = next_id_++;
        request["id"] = id;
        nlohmann::json reply = transport_->roundtrip(request);
        if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_number_integer())
            throw TransportError("reply carries no id");
        if (reply["id"].get<std::int64_t>() != static_cast<std::int64_t>(id))
            throw TransportError("reply id " + reply["id"].dump() + " does not match request id " + std::to_string(id));
        if (reply.contains("error")) throw TransportError("embedding service error: " + reply["error"].dump());
        return reply;
    }

    void check_dim(std::size_t got) {
        std::lock_guard lock(dim_mutex_);
        if (handle_.dim == 0) handle_.dim = got;
        if (got != handle_.dim)
            throw TransportError("embedding dimension " + std::to_string(got) + " differs from " +
                                 std::to_string(handle_.dim));
    }

    ProviderHandle handle_;
    std::unique_ptr<Transport> transport_;
    std::size_t max_batch_;
    std::size_t max_chars_;
    std::atomic<std::uint64_t> next_id_{1};
    std::mutex dim_mutex_;
};

}  // namespace qbd
