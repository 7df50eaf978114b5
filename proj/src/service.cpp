#include "tokviz/service.hpp"

#include <httplib.h>

#include <fmt/format.h>

#include "tokviz/midi.hpp"
#include "tokviz/response.hpp"

namespace tokviz {

namespace {

constexpr const char* kJson = "application/json";
// Room for multipart boundaries and the config/scheme parts on top of the file itself.
constexpr std::size_t kMultipartSlack = 64 * 1024;

void send_json(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), kJson);
}

void send_error(httplib::Response& res, int status, const std::string& error, const std::string& message,
                const std::string& field = {}) {
    Json body{{"error", error}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    send_json(res, status, body);
}

void handle_tokenize(const httplib::Request& req, httplib::Response& res, std::size_t maxUpload) {
    if (!req.is_multipart_form_data() || !req.has_file("file")) {
        send_error(res, 400, "BadRequest", "expected multipart/form-data with a 'file' part");
        return;
    }
    const auto file = req.get_file_value("file");
    if (file.content.size() > maxUpload) {
        send_error(res, 413, "PayloadTooLarge",
                   fmt::format("file is {} bytes; the limit is {}", file.content.size(), maxUpload), "file");
        return;
    }
    if (!req.has_file("scheme")) {
        send_error(res, 422, "InvalidScheme", "a 'scheme' part is required", "scheme");
        return;
    }
    const std::string schemeText = req.get_file_value("scheme").content;
    const auto scheme = parse_scheme(schemeText);
    if (!scheme) {
        send_error(res, 422, "InvalidScheme", fmt::format("unknown scheme '{}'", schemeText), "scheme");
        return;
    }

    try {
        GridConfig config;
        if (req.has_file("config")) {
            const std::string text = req.get_file_value("config").content;
            if (!text.empty()) {
                const Json doc = Json::parse(text, nullptr, false);
                if (doc.is_discarded()) throw ConfigError("config", "not a valid JSON document");
                config = parse_config(doc);
            }
        }
        const auto* data = reinterpret_cast<const std::uint8_t*>(file.content.data());
        res.status = 200;
        res.set_content(tokenize_body({data, file.content.size()}, *scheme, config), kJson);
    } catch (const midi::SmfError& e) {
        send_json(res, 400, Json{{"error", midi::to_string(e.code())}, {"message", e.what()}, {"offset", e.offset()}});
    } catch (const ConfigError& e) {
        send_error(res, 422, "InvalidConfig", e.what(), e.field());
    }
}

}  // namespace

Service::Service(ServiceOptions options) : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
    install_routes();
}

Service::~Service() {
    stop();
}

void Service::install_routes() {
    auto& s = *server_;
    s.set_payload_max_length(options_.maxUploadBytes + kMultipartSlack);
    // httplib's default adds SO_REUSEPORT, which would let a second server share a busy port.
    s.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });

    const std::size_t maxUpload = options_.maxUploadBytes;
    s.Post("/api/tokenize", [maxUpload](const httplib::Request& req, httplib::Response& res) {
        handle_tokenize(req, res, maxUpload);
    });
    s.Get("/api/tokenizers", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, descriptors_json()); });
    s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, health_json()); });

    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send_error(res, 500, "InternalError", what);
    });

    if (!options_.corsOrigin.empty()) {
        const std::string origin = options_.corsOrigin;
        s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        s.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Origin", origin);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
        });
    }
}

bool Service::bind() {
    if (options_.port == 0) {
        port_ = server_->bind_to_any_port(options_.host);
        return port_ > 0;
    }
    if (!server_->bind_to_port(options_.host, options_.port)) return false;
    port_ = options_.port;
    return true;
}

bool Service::run() {
    return server_->listen_after_bind();
}

void Service::stop() {
    if (server_ && server_->is_running()) server_->stop();
}

void Service::wait_until_ready() const {
    server_->wait_until_ready();
}

}  // namespace tokviz
