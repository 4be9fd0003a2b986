#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "debate_forge/corpus.hpp"
#include "debate_forge/external_backend.hpp"
#include "debate_forge/generation.hpp"
#include "debate_forge/ngram.hpp"
#include "debate_forge/retrieval.hpp"

namespace debate_forge {

inline NgramModel load_ngram_model(const std::filesystem::path& path) {
    const auto text = detail::read_text(path);
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw CorpusError("model file " + path.string() + " is not JSON");
    return NgramModel::from_json(j);
}

inline void save_ngram_model(const NgramModel& model, const std::filesystem::path& path) {
    detail::write_text(path, model.to_json().dump() + "\n");
}

// Backend specs:
//   echo
//   ngram:<model.json>
//   retrieval:<corpus dir>
//   exec:<command> | tcp:<host>:<port>
inline std::shared_ptr<GeneratorBackend> make_backend(
    const std::string& spec, std::chrono::milliseconds timeout = ExternalBackend::kDefaultTimeout) {
    if (spec == "echo") return std::make_shared<EchoBackend>();
    if (spec.rfind("ngram:", 0) == 0) {
        auto model = std::make_shared<const NgramModel>(load_ngram_model(spec.substr(6)));
        return std::make_shared<NgramBackend>(std::move(model));
    }
    if (spec.rfind("retrieval:", 0) == 0) {
        auto index = std::make_shared<const RetrievalIndex>(build_retrieval_index(read_corpus(spec.substr(10))));
        return std::make_shared<RetrievalBackend>(std::move(index));
    }
    if (spec.rfind("exec:", 0) == 0 || spec.rfind("tcp:", 0) == 0) {
        return std::make_shared<ExternalBackend>(parse_endpoint(spec), timeout);
    }
    throw BackendError(BackendError::Kind::Unavailable, "unknown backend spec '" + spec + "'");
}

// Named backends, shared across sessions.
class BackendRegistry {
public:
    void add(const std::string& name, std::shared_ptr<GeneratorBackend> backend) {
        backends_[name] = std::move(backend);
    }
    std::shared_ptr<GeneratorBackend> find(const std::string& name) const {
        auto it = backends_.find(name);
        return it == backends_.end() ? nullptr : it->second;
    }
    bool contains(const std::string& name) const { return backends_.count(name) != 0; }
    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [n, _] : backends_) out.push_back(n);
        return out;
    }

private:
    std::map<std::string, std::shared_ptr<GeneratorBackend>> backends_;
};

}  // namespace debate_forge
