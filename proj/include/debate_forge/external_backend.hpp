#pragma once

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <string>

#include <json.hpp>

#include "debate_forge/error.hpp"
#include "debate_forge/generation.hpp"

namespace debate_forge {

// "exec:<shell command>" runs a child and talks over its stdin/stdout;
// "tcp:<host>:<port>" connects to a socket.
struct Endpoint {
    enum class Kind { Exec, Tcp };
    Kind kind = Kind::Exec;
    std::string command;
    std::string host;
    std::string port;

    std::string to_string() const { return kind == Kind::Exec ? "exec:" + command : "tcp:" + host + ":" + port; }
};

inline Endpoint parse_endpoint(const std::string& spec) {
    Endpoint e;
    if (spec.rfind("exec:", 0) == 0) {
        e.kind = Endpoint::Kind::Exec;
        e.command = spec.substr(5);
        if (e.command.empty()) throw BackendError(BackendError::Kind::Unavailable, "empty command in '" + spec + "'");
        return e;
    }
    if (spec.rfind("tcp:", 0) == 0) {
        const auto rest = spec.substr(4);
        const auto colon = rest.rfind(':');
        if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
            throw BackendError(BackendError::Kind::Unavailable, "expected tcp:<host>:<port>, got '" + spec + "'");
        }
        e.kind = Endpoint::Kind::Tcp;
        e.host = rest.substr(0, colon);
        e.port = rest.substr(colon + 1);
        return e;
    }
    throw BackendError(BackendError::Kind::Unavailable, "unknown endpoint '" + spec + "'");
}

namespace detail {

inline void ignore_sigpipe() {
    static const bool done = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

// One line-oriented byte stream: a child's pipes or a socket.
class LineChannel {
public:
    LineChannel() = default;
    LineChannel(const LineChannel&) = delete;
    LineChannel& operator=(const LineChannel&) = delete;
    ~LineChannel() { close(); }

    bool open() const { return write_fd_ >= 0; }

    void connect(const Endpoint& ep) {
        close();
        ignore_sigpipe();
        if (ep.kind == Endpoint::Kind::Exec) {
            spawn(ep.command);
        } else {
            dial(ep.host, ep.port);
        }
    }

    void close() {
        if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
        if (write_fd_ >= 0) ::close(write_fd_);
        read_fd_ = write_fd_ = -1;
        buffer_.clear();
        if (child_ > 0) {
            ::kill(child_, SIGKILL);
            ::waitpid(child_, nullptr, 0);
            child_ = -1;
        }
    }

    void write_line(const std::string& line) {
        std::string data = line + '\n';
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = socket_ ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                                      : ::write(write_fd_, data.data() + off, data.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw BackendError(BackendError::Kind::BackendExit, "backend closed its input");
            off += static_cast<std::size_t>(n);
        }
    }

    std::string read_line(std::chrono::steady_clock::time_point deadline) {
        constexpr std::size_t kMaxLine = 64u << 20;
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            if (buffer_.size() > kMaxLine) throw BackendError(BackendError::Kind::ProtocolError, "reply line too long");
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (left.count() <= 0) throw BackendError(BackendError::Kind::Timeout, "backend did not reply in time");
            pollfd p{read_fd_, POLLIN, 0};
            const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
            if (r < 0 && errno == EINTR) continue;
            if (r < 0) throw BackendError(BackendError::Kind::BackendExit, std::strerror(errno));
            if (r == 0) continue;
            char chunk[4096];
            const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw BackendError(BackendError::Kind::BackendExit, exit_message());
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    void spawn(const std::string& command) {
        int to_child[2], from_child[2];
        if (::pipe2(to_child, O_CLOEXEC) != 0) throw BackendError(BackendError::Kind::Unavailable, "pipe failed");
        if (::pipe2(from_child, O_CLOEXEC) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw BackendError(BackendError::Kind::Unavailable, "pipe failed");
        }
        const char* cmd = command.c_str();
        const pid_t pid = ::fork();
        if (pid < 0) {
            for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
            throw BackendError(BackendError::Kind::Unavailable, "fork failed");
        }
        if (pid == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::execl("/bin/sh", "sh", "-c", cmd, static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        child_ = pid;
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
        socket_ = false;
    }

    void dial(const std::string& host, const std::string& port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) {
            throw BackendError(BackendError::Kind::Unavailable, "cannot resolve " + host + ":" + port);
        }
        int fd = -1;
        for (auto* ai = res; ai; ai = ai->ai_next) {
            fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        ::freeaddrinfo(res);
        if (fd < 0) throw BackendError(BackendError::Kind::Unavailable, "cannot connect to " + host + ":" + port);
        read_fd_ = write_fd_ = fd;
        socket_ = true;
    }

    std::string exit_message() {
        if (child_ <= 0) return "backend closed the connection";
        int status = 0;
        if (::waitpid(child_, &status, WNOHANG) == child_) {
            child_ = -1;
            if (WIFEXITED(status)) return "backend exited with status " + std::to_string(WEXITSTATUS(status));
            if (WIFSIGNALED(status)) return "backend killed by signal " + std::to_string(WTERMSIG(status));
        }
        return "backend closed its output";
    }

    int read_fd_ = -1;
    int write_fd_ = -1;
    bool socket_ = false;
    pid_t child_ = -1;
    std::string buffer_;
};

}  // namespace detail

inline nlohmann::json request_to_json(const GenerationRequest& req, std::int64_t id) {
    return {{"id", id},
            {"prompt", req.prompt},
            {"max_tokens", req.max_tokens},
            {"temperature", req.temperature},
            {"seed", req.seed}};
}

// Validates one reply line against the request id.
inline Tokens parse_reply(const std::string& line, std::int64_t expected_id) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        throw BackendError(BackendError::Kind::ProtocolError, "reply is not a JSON object");
    }
    const auto id = j.find("id");
    if (id == j.end() || !id->is_number_integer()) {
        throw BackendError(BackendError::Kind::ProtocolError, "reply has no integer id");
    }
    if (id->get<std::int64_t>() != expected_id) {
        throw BackendError(BackendError::Kind::ProtocolError, "reply id " + std::to_string(id->get<std::int64_t>()) +
                                                                  " does not match request id " +
                                                                  std::to_string(expected_id));
    }
    if (const auto err = j.find("error"); err != j.end()) {
        throw BackendError(BackendError::Kind::Remote, err->is_string() ? err->get<std::string>() : err->dump());
    }
    const auto tokens = j.find("tokens");
    if (tokens == j.end() || !tokens->is_array()) {
        throw BackendError(BackendError::Kind::ProtocolError, "reply has neither tokens nor error");
    }
    Tokens out;
    for (const auto& t : *tokens) {
        if (!t.is_string()) throw BackendError(BackendError::Kind::ProtocolError, "non-string token in reply");
        out.push_back(t.get<std::string>());
    }
    return out;
}

// Client for the newline-delimited JSON protocol. One request is in flight
// at a time; a failed exchange drops the connection and the next call
// reconnects.
class ExternalBackend : public GeneratorBackend {
public:
    static constexpr std::chrono::milliseconds kDefaultTimeout{30000};

    explicit ExternalBackend(Endpoint endpoint, std::chrono::milliseconds timeout = kDefaultTimeout,
                             bool deterministic = false)
        : endpoint_(std::move(endpoint)), timeout_(timeout), deterministic_(deterministic) {}

    Tokens generate(const GenerationRequest& req) override {
        validate_request(req);
        std::lock_guard lock(mutex_);
        try {
            if (!channel_.open()) channel_.connect(endpoint_);
            const auto id = next_id_++;
            channel_.write_line(request_to_json(req, id).dump());
            auto tokens = parse_reply(channel_.read_line(std::chrono::steady_clock::now() + timeout_), id);
            return ensure_eos(std::move(tokens), req.max_tokens);
        } catch (const BackendError& e) {
            if (e.kind() != BackendError::Kind::Remote) channel_.close();
            throw;
        }
    }

    std::string describe() const override { return endpoint_.to_string(); }
    bool deterministic() const override { return deterministic_; }

private:
    Endpoint endpoint_;
    std::chrono::milliseconds timeout_;
    bool deterministic_;
    std::mutex mutex_;
    detail::LineChannel channel_;
    std::int64_t next_id_ = 1;
};

}  // namespace debate_forge
