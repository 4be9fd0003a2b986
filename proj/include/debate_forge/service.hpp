#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "debate_forge/backends.hpp"
#include "debate_forge/error.hpp"
#include "debate_forge/eval.hpp"
#include "debate_forge/orchestrator.hpp"

namespace debate_forge {

// ---- configuration ---------------------------------------------------------

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "debate-forge-data";
    std::string cors_origin = "*";
    std::string default_backend;
    int max_tokens = 60;
    double temperature = 1.0;
    int backend_timeout_ms = 30000;
    // name -> backend spec (see make_backend)
    std::map<std::string, std::string> backends;
};

namespace detail {

inline std::string unquote(std::string_view v, std::size_t line_no) {
    v = trim(v);
    if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
        return std::string(v.substr(1, v.size() - 2));
    }
    if (!v.empty() && (v.front() == '"' || v.front() == '\'')) {
        throw Error("config line " + std::to_string(line_no) + ": unterminated string");
    }
    return std::string(v);
}

inline int config_int(const std::string& v, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const int x = std::stoi(v, &used);
        if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
    throw Error("config line " + std::to_string(line_no) + ": expected an integer, got '" + v + "'");
}

}  // namespace detail

// key = value lines, '#' comments, and a [backends] table of name = spec.
inline ServiceConfig parse_service_config(const std::string& text) {
    ServiceConfig c;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        char quote = 0;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (quote) {
                if (ch == quote) quote = 0;
            } else if (ch == '"' || ch == '\'') {
                quote = ch;
            } else if (ch == '#') {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error("config line " + std::to_string(line_no) + ": bad section header");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (section != "backends") throw Error("config line " + std::to_string(line_no) + ": unknown section");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value = detail::unquote(line.substr(eq + 1), line_no);
        if (section == "backends") {
            c.backends[key] = value;
        } else if (key == "host") {
            c.host = value;
        } else if (key == "port") {
            c.port = detail::config_int(value, line_no);
        } else if (key == "data_dir") {
            c.data_dir = value;
        } else if (key == "cors_origin") {
            c.cors_origin = value;
        } else if (key == "default_backend") {
            c.default_backend = value;
        } else if (key == "max_tokens") {
            c.max_tokens = detail::config_int(value, line_no);
        } else if (key == "temperature") {
            try {
                c.temperature = std::stod(value);
            } catch (const std::exception&) {
                throw Error("config line " + std::to_string(line_no) + ": expected a number");
            }
        } else if (key == "backend_timeout_ms") {
            c.backend_timeout_ms = detail::config_int(value, line_no);
        } else {
            throw Error("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    if (c.default_backend.empty() && !c.backends.empty()) c.default_backend = c.backends.begin()->first;
    return c;
}

inline BackendRegistry registry_from_config(const ServiceConfig& c) {
    BackendRegistry r;
    for (const auto& [name, spec] : c.backends) {
        r.add(name, make_backend(spec, std::chrono::milliseconds(c.backend_timeout_ms)));
    }
    return r;
}

// ---- durable store ---------------------------------------------------------

namespace detail {

// Appends whole lines and syncs them to disk before returning.
class AppendFile {
public:
    explicit AppendFile(const std::filesystem::path& path) : path_(path) {}
    ~AppendFile() {
        if (file_) std::fclose(file_);
    }
    AppendFile(const AppendFile&) = delete;
    AppendFile& operator=(const AppendFile&) = delete;

    void append(const std::string& text) {
        std::lock_guard lock(mutex_);
        if (!file_) {
            file_ = std::fopen(path_.c_str(), "ab");
            if (!file_) throw Error("cannot open " + path_.string() + " for appending");
        }
        if (std::fwrite(text.data(), 1, text.size(), file_) != text.size() || std::fflush(file_) != 0 ||
            ::fsync(::fileno(file_)) != 0) {
            throw Error("write to " + path_.string() + " failed");
        }
    }

private:
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    std::mutex mutex_;
};

}  // namespace detail

// In-memory transcripts backed by an append-only JSONL event log:
//   {"event":"create","transcript":{...}}
//   {"event":"turns","debate_id":"...","turns":[...]}
class SessionStore {
public:
    struct Session {
        std::mutex turn_mutex;
        DebateTranscript transcript;
    };

    explicit SessionStore(const std::filesystem::path& data_dir)
        : data_dir_(data_dir), log_path_(data_dir / "transcripts.jsonl"), ratings_path_(data_dir / "ratings.csv"),
          log_(log_path_), ratings_(ratings_path_) {
        std::filesystem::create_directories(data_dir_);
        replay();
        if (!std::filesystem::exists(ratings_path_) || std::filesystem::file_size(ratings_path_) == 0) {
            ratings_.append(kRatingsHeader + "\n");
        }
    }

    const std::filesystem::path& log_path() const { return log_path_; }
    const std::filesystem::path& ratings_path() const { return ratings_path_; }

    std::string next_id() { return format_id(++counter_); }

    std::shared_ptr<Session> find(const std::string& id) const {
        std::shared_lock lock(map_mutex_);
        auto it = sessions_.find(id);
        return it == sessions_.end() ? nullptr : it->second;
    }

    std::size_t size() const {
        std::shared_lock lock(map_mutex_);
        return sessions_.size();
    }

    std::vector<std::string> ids() const {
        std::shared_lock lock(map_mutex_);
        std::vector<std::string> out;
        for (const auto& [id, _] : sessions_) out.push_back(id);
        return out;
    }

    // Logs, then publishes.
    void create(const DebateTranscript& t) {
        nlohmann::ordered_json e;
        e["event"] = "create";
        e["transcript"] = transcript_to_json(t);
        log_.append(e.dump() + "\n");
        auto s = std::make_shared<Session>();
        s->transcript = t;
        std::unique_lock lock(map_mutex_);
        sessions_[t.debate_id] = std::move(s);
    }

    // Caller holds session.turn_mutex. Logs the turns past the stored ones,
    // then commits.
    void commit_turns(Session& session, DebateTranscript updated) {
        const auto from = session.transcript.turns.size();
        nlohmann::ordered_json e;
        e["event"] = "turns";
        e["debate_id"] = updated.debate_id;
        auto turns = nlohmann::ordered_json::array();
        for (std::size_t i = from; i < updated.turns.size(); ++i) {
            const auto& turn = updated.turns[i];
            turns.push_back({{"speaker", to_string(turn.speaker)}, {"tokens", turn.tokens}});
        }
        e["turns"] = std::move(turns);
        log_.append(e.dump() + "\n");
        session.transcript = std::move(updated);
    }

    void append_rating(const RatingRecord& r) { ratings_.append(rating_to_csv_row(r)); }

private:
    static std::string format_id(std::uint64_t n) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "debate-%06llu", static_cast<unsigned long long>(n));
        return buf;
    }

    void replay() {
        if (!std::filesystem::exists(log_path_)) return;
        const auto text = detail::read_text(log_path_);
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            const auto e = nlohmann::json::parse(line, nullptr, false);
            if (e.is_discarded()) {
                // A crash can leave a partial last line; anything else is corruption.
                if (in.peek() == EOF && text.back() != '\n') break;
                throw Error("transcript log line " + std::to_string(line_no) + " is not JSON");
            }
            const auto kind = e.value("event", std::string());
            if (kind == "create") {
                auto t = transcript_from_json(e.at("transcript"));
                auto s = std::make_shared<Session>();
                observe_id(t.debate_id);
                s->transcript = std::move(t);
                sessions_[s->transcript.debate_id] = std::move(s);
            } else if (kind == "turns") {
                auto it = sessions_.find(e.at("debate_id").get<std::string>());
                if (it == sessions_.end()) {
                    throw Error("transcript log line " + std::to_string(line_no) + ": unknown debate");
                }
                for (const auto& tj : e.at("turns")) {
                    const auto speaker = parse_speaker(tj.at("speaker").get<std::string>());
                    if (!speaker) throw Error("transcript log line " + std::to_string(line_no) + ": bad speaker");
                    it->second->transcript.turns.push_back(make_turn(*speaker, tj.at("tokens").get<Tokens>()));
                }
            } else {
                throw Error("transcript log line " + std::to_string(line_no) + ": unknown event");
            }
        }
    }

    void observe_id(const std::string& id) {
        if (id.rfind("debate-", 0) != 0) return;
        const auto digits = id.substr(7);
        if (digits.empty() || digits.size() > 18 ||
            !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            return;
        }
        counter_ = std::max<std::uint64_t>(counter_, std::stoull(digits));
    }

    std::filesystem::path data_dir_;
    std::filesystem::path log_path_;
    std::filesystem::path ratings_path_;
    detail::AppendFile log_;
    detail::AppendFile ratings_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::atomic<std::uint64_t> counter_{0};
};

// ---- request handling ------------------------------------------------------

struct ApiResponse {
    int status = 200;
    // Empty for 204.
    std::string body;
};

namespace detail {

inline ApiResponse json_response(int status, const nlohmann::ordered_json& j) { return {status, j.dump()}; }

inline ApiResponse error_response(int status, const std::string& message) {
    return json_response(status, nlohmann::ordered_json{{"error", message}});
}

// Body as a JSON object; an empty body counts as {}.
inline std::optional<nlohmann::json> object_body(const std::string& body) {
    if (trim(body).empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

}  // namespace detail

// HTTP-independent API. Each handler maps a request body to a status and a
// JSON body.
class DebateService {
public:
    static constexpr int kMaxTurns = 15;

    DebateService(ServiceConfig config, BackendRegistry backends)
        : config_(std::move(config)), backends_(std::move(backends)), store_(config_.data_dir) {}

    const ServiceConfig& config() const { return config_; }
    SessionStore& store() { return store_; }

    ApiResponse health() const {
        nlohmann::ordered_json j;
        j["status"] = "ok";
        j["debates"] = store_.size();
        j["backends"] = backends_.names();
        return detail::json_response(200, j);
    }

    ApiResponse create_debate(const std::string& body) {
        const auto j = detail::object_body(body);
        if (!j) return detail::error_response(400, "body must be a JSON object");
        const auto subject = j->find("subject");
        if (subject == j->end() || !subject->is_string()) return detail::error_response(400, "subject is required");
        if (subject_tokens(subject->get<std::string>()).empty()) {
            return detail::error_response(400, "subject has no words");
        }
        DebateConfig cfg;
        cfg.max_tokens = config_.max_tokens;
        cfg.temperature = config_.temperature;
        if (const auto m = j->find("max_turns"); m != j->end()) {
            if (!m->is_number_integer()) return detail::error_response(400, "max_turns must be an integer");
            cfg.max_turns = m->get<int>();
        }
        if (cfg.max_turns < 1 || cfg.max_turns > kMaxTurns) {
            return detail::error_response(400, "max_turns must be between 1 and 15");
        }
        cfg.backend = config_.default_backend;
        if (const auto b = j->find("backend"); b != j->end()) {
            if (!b->is_string()) return detail::error_response(400, "backend must be a string");
            cfg.backend = b->get<std::string>();
        }
        const auto backend = backends_.find(cfg.backend);
        if (!backend) return detail::error_response(422, "unknown backend '" + cfg.backend + "'");
        if (const auto h = j->find("history"); h != j->end()) {
            const auto mode = h->is_string() ? parse_history_mode(h->get<std::string>()) : std::nullopt;
            if (!mode) return detail::error_response(400, "history must be \"full\" or \"last-response\"");
            cfg.history = *mode;
        }
        const auto id = store_.next_id();
        cfg.seed = std::stoull(id.substr(id.find('-') + 1));
        if (const auto s = j->find("seed"); s != j->end()) {
            if (!s->is_number_unsigned()) return detail::error_response(400, "seed must be a non-negative integer");
            cfg.seed = s->get<std::uint64_t>();
        }
        try {
            const auto t = new_debate(subject->get<std::string>(), *backend, cfg, id);
            store_.create(t);
            return detail::json_response(201, transcript_to_json(t));
        } catch (const BackendError& e) {
            return detail::error_response(502, e.what());
        }
    }

    ApiResponse get_debate(const std::string& id) const {
        const auto s = store_.find(id);
        if (!s) return detail::error_response(404, "no debate '" + id + "'");
        std::lock_guard lock(s->turn_mutex);
        return detail::json_response(200, transcript_to_json(s->transcript));
    }

    // {"text": "..."} adds a human turn and, if there is room, the agent's
    // reply; no text lets the agent take one turn.
    ApiResponse post_turn(const std::string& id, const std::string& body) {
        const auto s = store_.find(id);
        if (!s) return detail::error_response(404, "no debate '" + id + "'");
        const auto j = detail::object_body(body);
        if (!j) return detail::error_response(400, "body must be a JSON object");
        std::optional<std::string> text;
        if (const auto t = j->find("text"); t != j->end() && !t->is_null()) {
            if (!t->is_string()) return detail::error_response(400, "text must be a string");
            if (tokenize(t->get<std::string>()).empty()) return detail::error_response(400, "text has no words");
            text = t->get<std::string>();
        }

        std::lock_guard lock(s->turn_mutex);
        if (s->transcript.full()) return detail::error_response(409, "debate is full");
        const auto backend = backends_.find(s->transcript.config.backend);
        if (!backend) return detail::error_response(502, "backend '" + s->transcript.config.backend + "' is gone");
        try {
            auto updated = s->transcript;
            if (text && !updated.turns.empty() && updated.turns.back().speaker == Speaker::Human) {
                return detail::error_response(409, "waiting for the agent's turn");
            }
            updated = advance_turn(std::move(updated), *backend, text);
            if (text && !updated.full()) updated = advance_turn(std::move(updated), *backend);
            store_.commit_turns(*s, std::move(updated));
            return detail::json_response(200, transcript_to_json(s->transcript));
        } catch (const BackendError& e) {
            return detail::error_response(502, e.what());
        } catch (const DebateError& e) {
            return detail::error_response(e.kind() == DebateError::Kind::DebateFull ? 409 : 400, e.what());
        }
    }

    ApiResponse submit_rating(const std::string& id, const std::string& body) {
        const auto s = store_.find(id);
        if (!s) return detail::error_response(404, "no debate '" + id + "'");
        const auto j = detail::object_body(body);
        if (!j) return detail::error_response(400, "body must be a JSON object");
        RatingRecord r;
        r.packet_id = id;
        r.rater_id = "anonymous";
        if (const auto rater = j->find("rater_id"); rater != j->end()) {
            if (!rater->is_string() || rater->get<std::string>().empty() ||
                rater->get<std::string>().find_first_of(",\r\n\"") != std::string::npos) {
                return detail::error_response(400, "rater_id must be a plain non-empty string");
            }
            r.rater_id = rater->get<std::string>();
        }
        for (std::size_t c = 0; c < 4; ++c) {
            const auto& name = rating_criteria()[c];
            const auto v = j->find(name);
            if (v == j->end() || !v->is_number_integer()) return detail::error_response(400, name + " is required");
            const auto x = v->get<std::int64_t>();
            if (x < 1 || x > 4) return detail::error_response(400, name + " must be between 1 and 4");
            r.scores[c] = static_cast<int>(x);
        }
        store_.append_rating(r);
        return {204, {}};
    }

private:
    ServiceConfig config_;
    BackendRegistry backends_;
    SessionStore store_;
};

}  // namespace debate_forge
