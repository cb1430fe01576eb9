#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace parallax::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (without the program name). Results go to
/// `out`, the JSON-lines log and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Static file server for bundle directories under `root`. Include
/// <httplib.h> after any Eigen header to use the result.
std::unique_ptr<httplib::Server> make_bundle_server(const std::filesystem::path& root);

/// Serves `root` on `port` until the process is stopped.
void serve_bundles(const std::filesystem::path& root, int port);

}  // namespace parallax::cli
