#pragma once

// HTTP front end: POST /api/tokenize, GET /api/tokenizers, GET /healthz.

#include <cstddef>
#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace tokviz {

struct ServiceOptions {
    std::string host{"0.0.0.0"};
    int port{8711};  // 0 picks a free port
    std::size_t maxUploadBytes{5u * 1024u * 1024u};
    std::string corsOrigin;  // empty disables CORS headers
};

class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Routes are installed before binding, so a successful bind means the service is complete.
    bool bind();
    int port() const { return port_; }
    /// Blocks until stop().
    bool run();
    void stop();
    void wait_until_ready() const;

private:
    void install_routes();

    ServiceOptions options_;
    std::unique_ptr<httplib::Server> server_;
    int port_{-1};
};

}  // namespace tokviz
