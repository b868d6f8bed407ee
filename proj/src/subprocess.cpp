#include "subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "latomo/error.hpp"

extern char** environ;

namespace latomo {

namespace {

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return left.count() > 0 ? static_cast<int>(left.count()) : 0;
}

void close_fd(int& fd) {
    if (fd >= 0) {
        ::close(fd);
        fd = -1;
    }
}

}  // namespace

Subprocess::Subprocess(const std::vector<std::string>& argv) {
    if (argv.empty()) throw RuntimeError("cannot spawn an empty command");
    // A dead peer must surface as EPIPE, not kill the parent.
    ::signal(SIGPIPE, SIG_IGN);

    int in_pipe[2], out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw RuntimeError("pipe: " + std::string(std::strerror(errno)));
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
        ::close(in_pipe[0]);
        ::close(in_pipe[1]);
        throw RuntimeError("pipe: " + std::string(std::strerror(errno)));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = -1;
    const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
        ::close(in_pipe[1]);
        ::close(out_pipe[0]);
        throw RuntimeError("failed to spawn '" + argv[0] + "': " + std::strerror(rc));
    }
    pid_ = pid;
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];
}

Subprocess::~Subprocess() {
    close_fd(stdin_fd_);
    if (pid_ > 0) wait(std::chrono::milliseconds(2000));
    close_fd(stdout_fd_);
}

void Subprocess::write_all(const std::uint8_t* data, std::size_t n,
                           std::chrono::milliseconds timeout) {
    if (stdin_fd_ < 0) throw ProtocolError("peer stdin already closed");
    const auto deadline = Clock::now() + timeout;
    while (n > 0) {
        pollfd pfd{stdin_fd_, POLLOUT, 0};
        const int pr = ::poll(&pfd, 1, remaining_ms(deadline));
        if (pr == 0) throw ProtocolError("timed out writing to denoiser process");
        if (pr < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("poll failed: " + std::string(std::strerror(errno)));
        }
        const ssize_t w = ::write(stdin_fd_, data, n);
        if (w < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw ProtocolError("denoiser process closed its input: " +
                                std::string(std::strerror(errno)));
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
}

void Subprocess::read_exact(std::uint8_t* data, std::size_t n, std::chrono::milliseconds timeout) {
    if (stdout_fd_ < 0) throw ProtocolError("peer stdout already closed");
    const auto deadline = Clock::now() + timeout;
    while (n > 0) {
        pollfd pfd{stdout_fd_, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, remaining_ms(deadline));
        if (pr == 0) throw ProtocolError("timed out waiting for denoiser process");
        if (pr < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("poll failed: " + std::string(std::strerror(errno)));
        }
        const ssize_t r = ::read(stdout_fd_, data, n);
        if (r < 0) {
            if (errno == EINTR || errno == EAGAIN) continue;
            throw ProtocolError("read from denoiser failed: " + std::string(std::strerror(errno)));
        }
        if (r == 0) throw ProtocolError("denoiser process closed its output");
        data += r;
        n -= static_cast<std::size_t>(r);
    }
}

void Subprocess::close_stdin() { close_fd(stdin_fd_); }

int Subprocess::wait(std::chrono::milliseconds timeout) {
    if (pid_ <= 0) return -1;
    const auto deadline = Clock::now() + timeout;
    int status = 0;
    for (;;) {
        const pid_t r = ::waitpid(pid_, &status, WNOHANG);
        if (r == pid_) break;
        if (r < 0 && errno != EINTR) {
            pid_ = -1;
            return -1;
        }
        if (Clock::now() >= deadline) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
            pid_ = -1;
            return -1;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    pid_ = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace latomo
