#include "q2/backends/transport.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

#include "q2/error.hpp"

extern char **environ;

namespace q2::backends {

HttpTransport::HttpTransport(std::string base_url, double timeout_seconds) : timeout_seconds_(timeout_seconds) {
    while (!base_url.empty() && base_url.back() == '/')
        base_url.pop_back();
    auto scheme_end = base_url.find("://");
    auto path_start = base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        scheme_host_port_ = base_url;
    } else {
        scheme_host_port_ = base_url.substr(0, path_start);
        path_prefix_ = base_url.substr(path_start);
    }
}

nlohmann::json HttpTransport::call(std::string_view capability, const nlohmann::json &request) {
    // One client per call keeps concurrent callers independent.
    httplib::Client client(scheme_host_port_);
    auto secs = static_cast<time_t>(timeout_seconds_);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    const auto path = path_prefix_ + "/" + std::string(capability);
    auto res = client.Post(path, request.dump(), "application/json");
    if (!res)
        throw TransportError(std::string(capability) + ": request to " + scheme_host_port_ + path +
                             " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError(std::string(capability) + ": HTTP " + std::to_string(res->status) + " from " +
                             scheme_host_port_ + path);
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error &e) {
        throw ProtocolError(std::string(capability) + ": reply is not JSON: " + e.what());
    }
}

StdioTransport::StdioTransport(std::vector<std::string> argv) {
    if (argv.empty())
        throw TransportError("stdio transport: empty command");
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
        throw TransportError(std::string("stdio transport: pipe failed: ") + std::strerror(errno));

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
    posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

    std::vector<char *> cargv;
    for (auto &a : argv)
        cargv.push_back(a.data());
    cargv.push_back(nullptr);

    int rc = posix_spawnp(&pid_, cargv[0], &actions, nullptr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        throw TransportError("stdio transport: cannot start '" + argv[0] + "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    // A dead child must surface as EPIPE, not kill the process.
    std::signal(SIGPIPE, SIG_IGN);
}

StdioTransport::~StdioTransport() {
    if (to_child_ >= 0)
        close(to_child_);
    if (from_child_ >= 0)
        close(from_child_);
    if (pid_ > 0) {
        int status = 0;
        waitpid(pid_, &status, 0);
    }
}

std::string StdioTransport::read_line() {
    for (;;) {
        auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            auto line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        auto n = read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            throw TransportError("stdio transport: backend process closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

nlohmann::json StdioTransport::call(std::string_view capability, const nlohmann::json &request) {
    std::lock_guard lock(mutex_);
    auto line = nlohmann::json{{"capability", capability}, {"request", request}}.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        auto n = write(to_child_, line.data() + written, line.size() - written);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            throw TransportError(std::string("stdio transport: write failed: ") + std::strerror(errno));
        written += static_cast<std::size_t>(n);
    }
    auto reply = read_line();
    try {
        return nlohmann::json::parse(reply);
    } catch (const nlohmann::json::parse_error &e) {
        throw ProtocolError(std::string(capability) + ": reply is not JSON: " + e.what());
    }
}

} // namespace q2::backends
