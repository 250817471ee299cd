#pragma once

#include <functional>
#include <string>

#include "eqsearch/search_engine.hpp"

namespace httplib {
class Server;
}

namespace eqsearch {

struct HttpReply {
    int status = 200;
    std::string body;  // JSON
};

// HTTP front end over a SearchEngine. Handlers are plain functions so they
// can be exercised without a socket.
//   POST /api/search        {"query": ..., "k": 10} -> {"results": [...]}
//   GET  /api/equation/{id} -> equation record
//   GET  /api/health        -> {"status": "ok", "n": ...}
// Errors are {"error": message} with 400 (bad JSON or query; "position" for
// LaTeX errors), 404 (unknown id) or 422 (k outside [1, 1000]).
class SearchService {
public:
    explicit SearchService(const SearchEngine& engine) : engine_(engine) {}

    HttpReply handle_search(const std::string& body) const;
    HttpReply handle_equation(const std::string& eq_id) const;
    HttpReply handle_health() const;

    // Registers the routes (and permissive CORS headers) on `server`.
    void mount(httplib::Server& server) const;

private:
    const SearchEngine& engine_;
};

inline constexpr std::size_t kDefaultK = 10;

// Blocks until the server stops. Port 0 binds any free port; `on_listening`
// receives the bound port. Returns false when binding fails.
bool serve(const SearchEngine& engine, const std::string& host, int port,
           const std::function<void(int)>& on_listening = {});

}  // namespace eqsearch
