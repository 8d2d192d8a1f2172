#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <thread>

#include "plabel/detector.hpp"
#include "plabel/error.hpp"

namespace plabel::detail {

namespace {

constexpr std::size_t kStderrTail = 4096;

std::string tail_of(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string body{std::istreambuf_iterator<char>(in), {}};
  if (body.size() > kStderrTail) body = body.substr(body.size() - kStderrTail);
  return body;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& workdir,
                          const std::vector<std::string>& env,
                          std::chrono::milliseconds timeout,
                          const std::filesystem::path& log_stem) {
  if (argv.empty()) fail(ErrorKind::Config, "external detector command is empty");
  std::error_code ec;
  std::filesystem::create_directories(workdir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + workdir.string() + ": " + ec.message());

  auto out_path = log_stem;
  out_path += ".stdout";
  auto err_path = log_stem;
  err_path += ".stderr";

  std::vector<char*> c_argv;
  for (const auto& a : argv) c_argv.push_back(const_cast<char*>(a.c_str()));
  c_argv.push_back(nullptr);
  std::vector<char*> c_env;
  for (const auto& e : env) c_env.push_back(const_cast<char*>(e.c_str()));
  c_env.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out_path.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, err_path.c_str(),
                                   O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addchdir_np(&actions, workdir.c_str());

  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, c_argv[0], &actions, nullptr, c_argv.data(),
                              c_env.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) {
    fail(ErrorKind::Detector,
         "cannot start '" + argv[0] + "': " + std::strerror(rc));
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  int status = 0;
  for (;;) {
    const pid_t done = waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (done < 0 && errno != EINTR) {
      fail(ErrorKind::Detector, std::string("waitpid failed: ") + std::strerror(errno));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      fail(ErrorKind::Timeout, "'" + argv[0] + "' exceeded its " +
                                   std::to_string(timeout.count()) +
                                   " ms budget; stderr: " + tail_of(err_path));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  ProcessResult result;
  if (WIFEXITED(status)) {
    result.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_status = 128 + WTERMSIG(status);
  } else {
    result.exit_status = -1;
  }
  result.stderr_text = tail_of(err_path);
  return result;
}

}  // namespace plabel::detail
