#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "fplf/ingest.hpp"

namespace fplf::ingest {

namespace {

class HttplibClient final : public HttpClient {
public:
    std::string get(const std::string& url) override {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw Error(ErrorKind::config, "malformed URL: " + url);
        const auto path_start = url.find('/', scheme_end + 3);
        const std::string origin = url.substr(0, path_start);
        const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

        httplib::Client client(origin);
        client.set_follow_location(true);
        client.set_connection_timeout(10);
        client.set_read_timeout(30);
        client.set_default_headers({{"User-Agent", "fplf/1.0"}});
        auto res = client.Get(path);
        if (!res)
            throw Error(ErrorKind::network, "GET " + url + ": " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(ErrorKind::network, "GET " + url + ": HTTP " + std::to_string(res->status));
        return res->body;
    }
};

}  // namespace

std::unique_ptr<HttpClient> make_http_client() { return std::make_unique<HttplibClient>(); }

}  // namespace fplf::ingest
