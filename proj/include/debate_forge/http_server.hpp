#pragma once

#include <string>

#include <httplib.h>

#include "debate_forge/service.hpp"

namespace debate_forge {

inline void install_routes(httplib::Server& server, DebateService& service) {
    const std::string origin = service.config().cors_origin;
    const auto reply = [](httplib::Response& res, const ApiResponse& api) {
        res.status = api.status;
        if (!api.body.empty()) res.set_content(api.body, "application/json");
    };

    server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/api/health", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.health());
    });
    server.Post("/api/debates", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.create_debate(req.body));
    });
    server.Get(R"(/api/debates/([^/]+))", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.get_debate(req.matches[1]));
    });
    server.Post(R"(/api/debates/([^/]+)/turns)",
                [&service, reply](const httplib::Request& req, httplib::Response& res) {
                    reply(res, service.post_turn(req.matches[1], req.body));
                });
    server.Post(R"(/api/debates/([^/]+)/rating)",
                [&service, reply](const httplib::Request& req, httplib::Response& res) {
                    reply(res, service.submit_rating(req.matches[1], req.body));
                });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (res.body.empty()) {
            res.set_content(nlohmann::json{{"error", httplib::status_message(res.status)}}.dump(),
                            "application/json");
        }
    });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        res.status = 500;
        res.set_content(nlohmann::json{{"error", what}}.dump(), "application/json");
    });
}

}  // namespace debate_forge
