#pragma once

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace latomo {

/// Child process with its stdin and stdout connected to pipes. stderr is
/// inherited. All blocking operations honour a deadline.
class Subprocess {
public:
    /// argv[0] is resolved through PATH. Throws RuntimeError on spawn failure.
    explicit Subprocess(const std::vector<std::string>& argv);
    ~Subprocess();

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    /// Throws ProtocolError on timeout or a closed pipe.
    void write_all(const std::uint8_t* data, std::size_t n, std::chrono::milliseconds timeout);
    void read_exact(std::uint8_t* data, std::size_t n, std::chrono::milliseconds timeout);

    void close_stdin();
    /// Waits up to timeout for exit, then kills. Returns the exit status, or
    /// -1 if the child had to be killed or died from a signal.
    int wait(std::chrono::milliseconds timeout);
    bool running() const noexcept { return pid_ > 0; }
    pid_t pid() const noexcept { return pid_; }

private:
    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
};

}  // namespace latomo
