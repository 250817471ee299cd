#include "eqsearch/service.hpp"

#include <httplib.h>

#include "eqsearch/error.hpp"

namespace eqsearch {

namespace {

HttpReply error_reply(int status, const std::string& message) {
    return {status, nlohmann::json{{"error", message}}.dump()};
}

}  // namespace

HttpReply SearchService::handle_search(const std::string& body) const {
    nlohmann::json req;
    try {
        req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        return error_reply(400, std::string("request body is not JSON: ") + e.what());
    }
    if (!req.is_object() || !req.contains("query") || !req["query"].is_string())
        return error_reply(400, "request needs a string field 'query'");
    std::size_t k = kDefaultK;
    if (req.contains("k")) {
        const auto& jk = req["k"];
        if (!jk.is_number_integer()) return error_reply(422, "k must be an integer in [1, 1000]");
        auto v = jk.get<long long>();
        if (v < 1 || v > static_cast<long long>(kMaxResults)) return error_reply(422, "k must be in [1, 1000]");
        k = static_cast<std::size_t>(v);
    }
    const auto query = req["query"].get<std::string>();
    if (query.find_first_not_of(" \t\r\n") == std::string::npos) return error_reply(400, "query is empty");
    try {
        nlohmann::json results = nlohmann::json::array();
        for (const auto& r : engine_.search(query, k)) results.push_back(to_json(r));
        return {200, nlohmann::json{{"results", results}}.dump()};
    } catch (const SyntaxError& e) {
        return {400, nlohmann::json{{"error", e.what()}, {"position", e.position()}}.dump()};
    } catch (const MalformedXml& e) {
        return {400, nlohmann::json{{"error", e.what()}, {"position", e.position()}}.dump()};
    } catch (const Error& e) {
        return error_reply(400, e.what());
    }
}

HttpReply SearchService::handle_equation(const std::string& eq_id) const {
    const auto* eq = engine_.equation(eq_id);
    if (!eq) return error_reply(404, "unknown equation '" + eq_id + "'");
    return {200, to_json(*eq).dump()};
}

HttpReply SearchService::handle_health() const {
    return {200, nlohmann::json{{"status", "ok"}, {"n", engine_.size()}}.dump()};
}

void SearchService::mount(httplib::Server& server) const {
    auto send = [](httplib::Response& res, const HttpReply& reply) {
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Post("/api/search", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, handle_search(req.body));
    });
    server.Get(R"(/api/equation/(.+))", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, handle_equation(req.matches[1]));
    });
    server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) {
        send(res, handle_health());
    });
}

bool serve(const SearchEngine& engine, const std::string& host, int port,
           const std::function<void(int)>& on_listening) {
    httplib::Server server;
    SearchService service(engine);
    service.mount(server);
    int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) return false;
    if (on_listening) on_listening(bound);
    return server.listen_after_bind();
}

}  // namespace eqsearch
