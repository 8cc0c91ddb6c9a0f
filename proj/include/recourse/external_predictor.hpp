#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recourse/error.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"

namespace recourse {

struct ExternalPredictorOptions {
    std::size_t max_batch = 1024;
    std::chrono::milliseconds timeout{30000};
};

// Model living in a child process that speaks NDJSON over stdin/stdout:
//
//   -> {"type":"handshake","features":[...],"task":"classification"|"regression"}
//   <- {"type":"ready","classes":[...]}            (classes only for classification)
//   -> {"type":"predict","id":k,"instances":[[v,...],...]}
//   <- {"type":"scores","id":k,"scores":[[s,...],...]}
//
// Requests are serialized behind a mutex; one request is in flight at a time.
class ExternalPredictor final : public PredictionFunction {
public:
    ExternalPredictor(const std::string& command, FeatureSchema schema, Task task,
                      ExternalPredictorOptions options = {})
        : schema_(std::move(schema)), task_(task), options_(options) {
        if (options_.max_batch == 0) throw Error(ErrorCode::invalid_argument, "max_batch must be positive");
        spawn(command);
        try {
            handshake();
        } catch (...) {
            shutdown();
            throw;
        }
    }

    ExternalPredictor(const ExternalPredictor&) = delete;
    ExternalPredictor& operator=(const ExternalPredictor&) = delete;

    ~ExternalPredictor() override { shutdown(); }

    [[nodiscard]] Task task() const override { return task_; }
    [[nodiscard]] const std::vector<std::string>& class_labels() const override { return classes_; }

    [[nodiscard]] ScoreMatrix predict_batch(std::span<const Instance> batch) const override {
        ScoreMatrix out;
        out.reserve(batch.size());
        std::lock_guard lock(mutex_);
        if (failure_) throw Error(failure_->code(), std::string("external predictor unusable after: ") + failure_->what());
        try {
            for (std::size_t start = 0; start < batch.size(); start += options_.max_batch) {
                auto chunk = batch.subspan(start, std::min(options_.max_batch, batch.size() - start));
                auto scores = request(chunk);
                for (auto& s : scores) out.push_back(std::move(s));
            }
        } catch (const Error& e) {
            // The stream may be out of sync; refuse further requests.
            if (e.code() != ErrorCode::schema) failure_ = e;
            throw;
        }
        return out;
    }

private:
    void spawn(const std::string& command) {
        int to_child[2], from_child[2];
        if (socketpair(AF_UNIX, SOCK_STREAM, 0, to_child) != 0 ||
            socketpair(AF_UNIX, SOCK_STREAM, 0, from_child) != 0)
            throw Error(ErrorCode::io, std::string("socketpair failed: ") + std::strerror(errno));
        pid_ = fork();
        if (pid_ < 0) throw Error(ErrorCode::io, std::string("fork failed: ") + std::strerror(errno));
        if (pid_ == 0) {
            dup2(to_child[1], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[1]);
        close(from_child[1]);
        write_fd_ = to_child[0];
        read_fd_ = from_child[0];
    }

    void shutdown() noexcept {
        if (write_fd_ >= 0) close(write_fd_);
        if (read_fd_ >= 0) close(read_fd_);
        write_fd_ = read_fd_ = -1;
        if (pid_ > 0) {
            int status = 0;
            for (int i = 0; i < 100; ++i) {
                if (waitpid(pid_, &status, WNOHANG) != 0) {
                    pid_ = -1;
                    return;
                }
                usleep(10000);
            }
            kill(pid_, SIGKILL);
            waitpid(pid_, &status, 0);
            pid_ = -1;
        }
    }

    void send_line(const std::string& line) const {
        std::string buf = line + "\n";
        std::size_t off = 0;
        while (off < buf.size()) {
            ssize_t n = ::send(write_fd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::process_exit, "external predictor closed its input (process exited?)");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line() const {
        auto deadline = std::chrono::steady_clock::now() + options_.timeout;
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw Error(ErrorCode::timeout, "external predictor did not answer in time");
            pollfd pfd{read_fd_, POLLIN, 0};
            int r = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (r < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::io, std::string("poll failed: ") + std::strerror(errno));
            }
            if (r == 0) throw Error(ErrorCode::timeout, "external predictor did not answer in time");
            char chunk[4096];
            ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
            if (n < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::io, std::string("read failed: ") + std::strerror(errno));
            }
            if (n == 0) throw Error(ErrorCode::process_exit, "external predictor exited unexpectedly");
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    static json parse_message(const std::string& line, const std::string& expected_type) {
        json msg;
        try {
            msg = json::parse(line);
        } catch (const json::exception&) {
            throw Error(ErrorCode::protocol_malformed, "external predictor sent a malformed line: " + line.substr(0, 200));
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string() || msg["type"] != expected_type)
            throw Error(ErrorCode::protocol_malformed,
                        "external predictor sent an unexpected message (wanted \"" + expected_type + "\"): " +
                            line.substr(0, 200));
        return msg;
    }

    void handshake() {
        json hello = {{"type", "handshake"}, {"features", schema_.names()}, {"task", std::string(to_string(task_))}};
        send_line(hello.dump());
        json ready;
        try {
            ready = parse_message(read_line(), "ready");
        } catch (const Error& e) {
            if (e.code() != ErrorCode::protocol_malformed) throw;
            throw Error(ErrorCode::handshake, std::string("handshake rejected: ") + e.what());
        }
        if (ready.contains("features") && ready["features"] != hello["features"])
            throw Error(ErrorCode::handshake, "child expects different features: " + ready["features"].dump());
        if (ready.contains("task") && ready["task"] != hello["task"])
            throw Error(ErrorCode::handshake, "child serves a different task: " + ready["task"].dump());
        if (task_ == Task::classification) {
            if (!ready.contains("classes") || !ready["classes"].is_array() || ready["classes"].empty())
                throw Error(ErrorCode::handshake, "classification child must announce its classes");
            for (const auto& c : ready["classes"]) {
                if (!c.is_string()) throw Error(ErrorCode::handshake, "class labels must be strings");
                classes_.push_back(c.get<std::string>());
            }
        } else if (ready.contains("classes") && !ready["classes"].is_null() && !ready["classes"].empty()) {
            throw Error(ErrorCode::handshake, "regression child announced classes");
        }
    }

    ScoreMatrix request(std::span<const Instance> chunk) const {
        json instances = json::array();
        for (const auto& x : chunk) {
            if (x.size() != schema_.size()) throw Error(ErrorCode::schema, "instance arity mismatch");
            json row = json::array();
            for (std::size_t j = 0; j < schema_.size(); ++j) row.push_back(schema_.value_to_json(j, x[j]));
            instances.push_back(std::move(row));
        }
        const long id = next_id_++;
        send_line(json{{"type", "predict"}, {"id", id}, {"instances", std::move(instances)}}.dump());
        json reply = parse_message(read_line(), "scores");
        if (!reply.contains("id") || !reply["id"].is_number_integer() || reply["id"].get<long>() != id)
            throw Error(ErrorCode::protocol_malformed, "external predictor answered with a mismatched id");
        if (!reply.contains("scores") || !reply["scores"].is_array())
            throw Error(ErrorCode::protocol_malformed, "reply lacks a scores array");
        const auto& scores = reply["scores"];
        if (scores.size() != chunk.size())
            throw Error(ErrorCode::protocol_length, "external predictor returned " + std::to_string(scores.size()) +
                                                        " score rows for " + std::to_string(chunk.size()) +
                                                        " instances");
        const std::size_t width = task_ == Task::classification ? classes_.size() : 1;
        ScoreMatrix out;
        out.reserve(chunk.size());
        for (const auto& row : scores) {
            if (!row.is_array()) throw Error(ErrorCode::protocol_malformed, "score row is not an array");
            if (row.size() != width)
                throw Error(ErrorCode::protocol_length, "score row has " + std::to_string(row.size()) +
                                                            " entries, expected " + std::to_string(width));
            std::vector<double> s;
            for (const auto& v : row) {
                if (!v.is_number()) throw Error(ErrorCode::protocol_nonnumeric, "non-numeric score " + v.dump());
                s.push_back(v.get<double>());
            }
            out.push_back(std::move(s));
        }
        return out;
    }

    FeatureSchema schema_;
    Task task_;
    ExternalPredictorOptions options_;
    std::vector<std::string> classes_;
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    mutable std::mutex mutex_;
    mutable std::string buffer_;
    mutable long next_id_ = 1;
    mutable std::optional<Error> failure_;
};

inline std::shared_ptr<ExternalPredictor> spawn_external_predictor(const std::string& command,
                                                                   const FeatureSchema& schema, Task task,
                                                                   ExternalPredictorOptions options = {}) {
    return std::make_shared<ExternalPredictor>(command, schema, task, options);
}

} // namespace recourse
