#include "commands.hpp"
#include "parallax/types.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro clashes with Eigen.
#include <httplib.h>

namespace parallax::cli {

std::unique_ptr<httplib::Server> make_bundle_server(const std::filesystem::path& root) {
  auto server = std::make_unique<httplib::Server>();
  if (!server->set_mount_point("/", root.string())) throw Error("cannot serve " + root.string());
  server->set_file_extension_and_mimetype_mapping("json", "application/json");
  server->set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
  });
  return server;
}

void serve_bundles(const std::filesystem::path& root, int port) {
  auto server = make_bundle_server(root);
  if (!server->listen("0.0.0.0", port)) throw Error("cannot listen on port " + std::to_string(port));
}

}  // namespace parallax::cli
