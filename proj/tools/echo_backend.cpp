// Reference backend for the newline-delimited JSON generation protocol.
// Replies to every request with its own prompt. The misbehaving modes exist
// so clients can exercise their error paths.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

int main(int argc, char** argv) {
    CLI::App app{"echo backend for the debate-forge wire protocol"};
    std::string mode = "echo";
    int delay_ms = 0;
    int exit_after = -1;
    app.add_option("--mode", mode, "echo | wrong-id | silent | garbage | error | exit")
        ->check(CLI::IsMember({"echo", "wrong-id", "silent", "garbage", "error", "exit"}));
    app.add_option("--delay-ms", delay_ms, "sleep before each reply");
    app.add_option("--exit-after", exit_after, "exit after answering this many requests");
    CLI11_PARSE(app, argc, argv);

    std::ios::sync_with_stdio(false);
    std::string line;
    int answered = 0;
    while (std::getline(std::cin, line)) {
        if (exit_after >= 0 && answered >= exit_after) return 0;
        if (mode == "exit") return 3;
        if (mode == "silent") continue;
        if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));

        nlohmann::json req = nlohmann::json::parse(line, nullptr, false);
        if (req.is_discarded()) {
            std::cout << R"({"id":-1,"error":"bad request"})" << '\n' << std::flush;
            continue;
        }
        const auto id = req.value("id", -1LL);
        nlohmann::json reply;
        if (mode == "garbage") {
            std::cout << "this is not json" << '\n' << std::flush;
            ++answered;
            continue;
        }
        reply["id"] = mode == "wrong-id" ? id + 1 : id;
        if (mode == "error") {
            reply["error"] = "backend refused";
        } else {
            reply["tokens"] = req.value("prompt", nlohmann::json::array());
        }
        std::cout << reply.dump() << '\n' << std::flush;
        ++answered;
    }
    return 0;
}
