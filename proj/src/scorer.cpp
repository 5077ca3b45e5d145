#include "graphaf/scorer.hpp"

#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>

#include "graphaf/molt.hpp"

namespace graphaf {

double RingPenaltyScorer::score(const MolecularGraph& g) const {
  const std::size_t n = g.size();
  std::vector<std::size_t> parent(n);
  for (std::size_t k = 0; k < n; ++k) parent[k] = k;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (!g.has_bond(i, j)) continue;
      const auto a = find(i), b = find(j);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
  }
  const double cycles = static_cast<double>(g.bond_count()) - static_cast<double>(n) + static_cast<double>(components);
  return -cycles;
}

AtomFractionScorer::AtomFractionScorer(const AtomVocab& atoms, const std::string& symbol) : symbol_(symbol) {
  const auto type = atoms.index_of(symbol);
  if (!type) throw UsageError("atom-fraction scorer: unknown atom symbol '" + symbol + "'");
  type_ = *type;
}

double AtomFractionScorer::score(const MolecularGraph& g) const {
  if (g.empty()) return 0.0;
  std::size_t hits = 0;
  for (auto t : g.node_types()) hits += t == type_;
  return static_cast<double>(hits) / static_cast<double>(g.size());
}

ExternalScorer::ExternalScorer(std::string path, Vocabulary vocab) : path_(std::move(path)), vocab_(std::move(vocab)) {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw ScorerError("cannot create scorer channel: " + std::string(std::strerror(errno)));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw ScorerError("cannot start scorer: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    ::close(fds[0]);
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::close(fds[1]);
    ::execl(path_.c_str(), path_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  fd_ = fds[0];
  pid_ = pid;
}

ExternalScorer::~ExternalScorer() {
  if (fd_ >= 0) ::close(fd_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

double ExternalScorer::score(const MolecularGraph& g) const {
  std::lock_guard lock(mutex_);
  const std::string request = to_molt(g, vocab_) + "#END\n";
  std::size_t sent = 0;
  while (sent < request.size()) {
    const auto n = ::send(fd_, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      throw ScorerError("scorer " + path_ + " closed its input");
    }
    sent += static_cast<std::size_t>(n);
  }
  std::size_t newline;
  while ((newline = pending_.find('\n')) == std::string::npos) {
    char buf[256];
    const auto n = ::read(fd_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ScorerError("scorer " + path_ + " exited without a reply");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
  std::string line = pending_.substr(0, newline);
  pending_.erase(0, newline + 1);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
  std::size_t start = line.find_first_not_of(" \t");
  if (start == std::string::npos) throw ScorerError("scorer " + path_ + " replied with an empty line");
  double value = 0.0;
  const char* first = line.data() + start;
  const char* last = line.data() + line.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw ScorerError("scorer " + path_ + " replied with a non-numeric line: '" + line + "'");
  }
  return value;
}

std::unique_ptr<PropertyScorer> make_scorer(const std::string& spec, const Vocabulary& vocab) {
  if (spec == "toy:atom-count") return std::make_unique<AtomCountScorer>();
  if (spec == "toy:ring-penalty") return std::make_unique<RingPenaltyScorer>();
  const std::string fraction = "toy:atom-fraction:";
  if (spec.starts_with(fraction)) return std::make_unique<AtomFractionScorer>(vocab.atoms, spec.substr(fraction.size()));
  if (spec.starts_with("exec:") && spec.size() > 5) return std::make_unique<ExternalScorer>(spec.substr(5), vocab);
  throw UsageError("unknown scorer '" + spec + "' (expected toy:atom-count, toy:ring-penalty, "
                   "toy:atom-fraction:<symbol> or exec:<path>)");
}

}  // namespace graphaf
