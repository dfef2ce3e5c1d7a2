#include "smellstab/history.hpp"

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <unordered_map>

#include "smellstab/util.hpp"

extern char** environ;

namespace smellstab {

// --- git process ------------------------------------------------------------

GitRepo::GitRepo(std::filesystem::path path, std::string git) : path_(std::move(path)), git_(std::move(git)) {}

namespace {

struct ProcessResult {
  int status = -1;
  std::string out;
  std::string err;
};

ProcessResult run_process(const std::vector<std::string>& argv) {
  int out_pipe[2], err_pipe[2];
  if (pipe(out_pipe) != 0) throw HistoryError(std::string("pipe failed: ") + std::strerror(errno));
  if (pipe(err_pipe) != 0) {
    close(out_pipe[0]);
    close(out_pipe[1]);
    throw HistoryError(std::string("pipe failed: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);
  posix_spawn_file_actions_addclose(&actions, err_pipe[0]);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err_pipe[1], STDERR_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  close(out_pipe[1]);
  close(err_pipe[1]);
  if (rc != 0) {
    close(out_pipe[0]);
    close(err_pipe[0]);
    throw HistoryError("cannot start " + argv[0] + ": " + std::strerror(rc));
  }
  ProcessResult res;
  pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
  std::string* sinks[2] = {&res.out, &res.err};
  int open_count = 2;
  char buf[65536];
  while (open_count > 0) {
    if (poll(fds, 2, -1) < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (int i = 0; i < 2; ++i) {
      if (fds[i].fd < 0 || !(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const ssize_t n = read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        sinks[i]->append(buf, static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        close(fds[i].fd);
        fds[i].fd = -1;
        --open_count;
      }
    }
  }
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  res.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::vector<std::string> git_argv(const std::string& git, const std::filesystem::path& repo,
                                  const std::vector<std::string>& args) {
  std::vector<std::string> argv = {git, "-C", repo.string(), "-c", "core.quotepath=off"};
  argv.insert(argv.end(), args.begin(), args.end());
  return argv;
}

}  // namespace

std::string GitRepo::run(const std::vector<std::string>& args) const {
  auto res = run_process(git_argv(git_, path_, args));
  if (res.status != 0)
    throw HistoryError("git " + join(args, " ") + " failed in " + path_.string() + ": " + trim(res.err));
  return res.out;
}

std::optional<std::string> GitRepo::try_run(const std::vector<std::string>& args) const {
  auto res = run_process(git_argv(git_, path_, args));
  if (res.status != 0) return std::nullopt;
  return res.out;
}

std::optional<std::string> GitRepo::show(const std::string& rev, const std::string& path) const {
  return try_run({"cat-file", "blob", rev + ":" + path});
}

// --- window ------------------------------------------------------------------

ObservationWindow make_window(const GitRepo& repo, const std::string& snapshot, const std::string& branch, int days) {
  if (days <= 0) throw HistoryError("window length must be positive");
  auto sha = repo.try_run({"rev-parse", "--verify", "--quiet", snapshot + "^{commit}"});
  if (!sha) throw HistoryError("snapshot " + snapshot + " not found in " + repo.path().string());
  auto tip = repo.try_run({"rev-parse", "--verify", "--quiet", branch + "^{commit}"});
  if (!tip) throw HistoryError("branch " + branch + " not found in " + repo.path().string());
  ObservationWindow w;
  w.snapshot = trim(*sha);
  w.branch = branch;
  const auto chain = split(repo.run({"rev-list", "--first-parent", branch}), '\n');
  if (std::find(chain.begin(), chain.end(), w.snapshot) == chain.end())
    throw HistoryError("snapshot " + snapshot + " is not on the first-parent chain of " + branch);
  w.start = std::stoll(trim(repo.run({"show", "-s", "--format=%ct", w.snapshot})));
  w.end = w.start + static_cast<std::int64_t>(days) * 86400;
  return w;
}

// --- line diffs --------------------------------------------------------------

std::pair<std::size_t, std::size_t> line_diff(const std::vector<std::string>& before,
                                              const std::vector<std::string>& after) {
  // Myers' O((N+M)D) shortest edit script length on interned lines.
  std::unordered_map<std::string_view, int> ids;
  auto intern = [&](const std::vector<std::string>& v) {
    std::vector<int> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(ids.emplace(s, static_cast<int>(ids.size())).first->second);
    return out;
  };
  const auto a = intern(before);
  const auto b = intern(after);
  const int n = static_cast<int>(a.size());
  const int m = static_cast<int>(b.size());
  const int max = n + m;
  std::vector<int> v(2 * static_cast<std::size_t>(max) + 2, 0);
  const int off = max + 1;
  int d_found = max;
  for (int d = 0; d <= max; ++d) {
    bool done = false;
    for (int k = -d; k <= d; k += 2) {
      int x = (k == -d || (k != d && v[off + k - 1] < v[off + k + 1])) ? v[off + k + 1] : v[off + k - 1] + 1;
      int y = x - k;
      while (x < n && y < m && a[x] == b[y]) {
        ++x;
        ++y;
      }
      v[off + k] = x;
      if (x >= n && y >= m) {
        done = true;
        break;
      }
    }
    if (done) {
      d_found = d;
      break;
    }
  }
  // D = inserted + removed and inserted - removed = m - n.
  const auto inserted = static_cast<std::size_t>((d_found + m - n) / 2);
  const auto removed = static_cast<std::size_t>((d_found - m + n) / 2);
  return {inserted, removed};
}

std::vector<std::string> significant_lines(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  for (const auto& l : lines) {
    if (l.empty()) continue;
    if (l.find_first_not_of("{}();,") == std::string::npos) continue;
    if (starts_with(l, "import") || starts_with(l, "package")) continue;
    out.push_back(l);
  }
  return out;
}

namespace {

std::size_t shared_count(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::string_view, std::size_t> counts;
  for (const auto& s : b) ++counts[s];
  std::size_t shared = 0;
  for (const auto& s : a) {
    auto it = counts.find(s);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++shared;
    }
  }
  return shared;
}

// Lines of `after` not matched by `before` (multiset difference).
std::vector<std::string> added_lines(const std::vector<std::string>& before, const std::vector<std::string>& after) {
  std::map<std::string_view, std::size_t> counts;
  for (const auto& s : before) ++counts[s];
  std::vector<std::string> out;
  for (const auto& s : after) {
    auto it = counts.find(s);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      continue;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

double line_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto sa = significant_lines(a);
  const auto sb = significant_lines(b);
  const std::size_t denom = std::max(sa.size(), sb.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(shared_count(sa, sb)) / static_cast<double>(denom);
}

double line_containment(const std::vector<std::string>& from, const std::vector<std::string>& to) {
  const auto sf = significant_lines(from);
  if (sf.empty()) return 0.0;
  return static_cast<double>(shared_count(sf, significant_lines(to))) / static_cast<double>(sf.size());
}

// --- commits -----------------------------------------------------------------

const FileChange* CommitRecord::find(const std::string& path) const {
  auto it = std::lower_bound(files.begin(), files.end(), path,
                             [](const FileChange& f, const std::string& p) { return f.path < p; });
  return it != files.end() && it->path == path ? &*it : nullptr;
}

std::size_t CommitRecord::total_churn() const {
  std::size_t t = 0;
  for (const auto& f : files) t += f.added + f.deleted;
  return t;
}

namespace {

bool is_java(const std::string& path) { return path.size() > 5 && path.compare(path.size() - 5, 5, ".java") == 0; }

std::optional<std::vector<std::string>> load_lines(const GitRepo& repo, const std::string& rev, const std::string& path,
                                                   bool& binary) {
  auto text = repo.show(rev, path);
  if (!text) return std::nullopt;
  if (text->find('\0') != std::string::npos) {
    binary = true;
    return std::vector<std::string>{};
  }
  return logical_code_lines(*text);
}

}  // namespace

std::vector<CommitRecord> enumerate_window_commits(const GitRepo& repo, const ObservationWindow& window) {
  std::vector<CommitRecord> out;
  const auto log = repo.run({"log", "--first-parent", "--reverse", "--format=%H%x09%ct%x09%P",
                             window.snapshot + ".." + window.branch});
  for (const auto& line : split(log, '\n')) {
    if (trim(line).empty()) continue;
    const auto parts = split(line, '\t');
    if (parts.size() < 3) throw HistoryError("unexpected log line: " + line);
    CommitRecord c;
    c.id = parts[0];
    c.timestamp = std::stoll(parts[1]);
    if (c.timestamp <= window.start || c.timestamp > window.end) continue;
    std::vector<std::string> parents;
    for (const auto& p : split(parts[2], ' '))
      if (!p.empty()) parents.push_back(p);
    c.parent_count = parents.size();
    if (parents.empty()) throw HistoryError("window commit " + c.id + " has no parent");
    const std::string& base = parents.front();
    const auto diff = repo.run({"diff-tree", "-r", "--no-renames", "--name-status", "-z", base, c.id});
    const auto fields = split(diff, '\0');
    for (std::size_t i = 0; i + 1 < fields.size(); i += 2) {
      const std::string& status = fields[i];
      const std::string& path = fields[i + 1];
      if (status.empty() || !is_java(path)) continue;
      FileChange f;
      f.path = path;
      bool bin_old = false, bin_new = false;
      if (status[0] != 'A') f.old_lines = load_lines(repo, base, path, bin_old);
      if (status[0] != 'D') f.new_lines = load_lines(repo, c.id, path, bin_new);
      f.binary = bin_old || bin_new;
      if (f.binary) {
        c.diagnostics.push_back(c.id + ": binary content in " + path + ", churn counted as 0");
      } else {
        static const std::vector<std::string> kEmpty;
        std::vector<std::string> o, n;
        for (const auto& l : f.old_lines.value_or(kEmpty))
          if (!l.empty()) o.push_back(l);
        for (const auto& l : f.new_lines.value_or(kEmpty))
          if (!l.empty()) n.push_back(l);
        f.old_lines = f.old_lines ? std::optional(o) : std::nullopt;
        f.new_lines = f.new_lines ? std::optional(n) : std::nullopt;
        std::tie(f.added, f.deleted) = line_diff(o, n);
      }
      c.files.push_back(std::move(f));
    }
    std::sort(c.files.begin(), c.files.end(), [](const auto& x, const auto& y) { return x.path < y.path; });
    out.push_back(std::move(c));
  }
  return out;
}

// --- lineage -----------------------------------------------------------------

std::string_view to_string(LineageStatus s) {
  switch (s) {
    case LineageStatus::Tracked: return "tracked";
    case LineageStatus::ExcludedSplit: return "excluded_split";
    case LineageStatus::ExcludedMerge: return "excluded_merge";
    case LineageStatus::ExcludedShared: return "excluded_shared";
    case LineageStatus::Deleted: return "deleted";
  }
  return "tracked";
}

LineageStatus parse_lineage_status(std::string_view s) {
  for (auto st : {LineageStatus::Tracked, LineageStatus::ExcludedSplit, LineageStatus::ExcludedMerge,
                  LineageStatus::ExcludedShared, LineageStatus::Deleted})
    if (to_string(st) == s) return st;
  throw std::invalid_argument("unknown lineage status: " + std::string(s));
}

std::optional<std::string> ClassLineage::path_before(int k) const {
  if (ended_at >= 0 && k > ended_at) return std::nullopt;
  std::optional<std::string> p;
  for (const auto& [idx, path] : timeline)
    if (idx < k) p = path;
  return p;
}

std::optional<std::string> ClassLineage::path_after(int k) const {
  if (ended_at >= 0 && k >= ended_at) return std::nullopt;
  std::optional<std::string> p;
  for (const auto& [idx, path] : timeline)
    if (idx <= k) p = path;
  return p;
}

namespace {

std::string repo_path(const LineageConfig& cfg, const std::string& file) {
  if (cfg.source_root.empty()) return file;
  std::string root = cfg.source_root;
  while (!root.empty() && root.back() == '/') root.pop_back();
  return root.empty() ? file : root + "/" + file;
}

std::string file_stem(const std::string& path) {
  auto slash = path.find_last_of('/');
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

std::string simple_name(const std::string& qualified) {
  auto dot = qualified.find_last_of('.');
  return dot == std::string::npos ? qualified : qualified.substr(dot + 1);
}

}  // namespace

std::vector<ClassLineage> class_lineage(const SourceCorpus& corpus, const std::vector<CommitRecord>& commits,
                                        const LineageConfig& config) {
  std::vector<ClassLineage> lineages;
  // The primary type of a file is the one named after it, else the first
  // declared; other top-level types share no churn.
  std::map<std::string, ArtifactRef> primary;
  for (auto t : corpus.top_level_types()) {
    const auto& file = corpus.type_of(t).file;
    auto it = primary.find(file);
    if (it == primary.end()) {
      primary[file] = t;
    } else if (simple_name(corpus.id(t).qualified_name) == file_stem(file) &&
               simple_name(corpus.id(it->second).qualified_name) != file_stem(file)) {
      it->second = t;
    }
  }
  std::map<std::string, std::size_t> live;  // repository path -> lineage index
  for (auto f : corpus.focal_classes()) {
    ClassLineage l;
    l.focal = corpus.id(f).display();
    l.ref = f;
    const auto& file = corpus.type_of(f).file;
    l.timeline.emplace_back(-1, repo_path(config, file));
    if (primary.at(file) != f) {
      l.status = LineageStatus::ExcludedShared;
      l.ended_at = -1;
    } else {
      live[l.timeline.back().second] = lineages.size();
    }
    lineages.push_back(std::move(l));
  }

  static const std::vector<std::string> kEmpty;
  for (std::size_t ci = 0; ci < commits.size(); ++ci) {
    const int k = static_cast<int>(ci);
    const auto& commit = commits[ci];
    // Successor content per changed file: whole new content for the file's
    // own lineage, added lines for everyone else.
    struct Touched {
      std::size_t lineage;
      const FileChange* change;
    };
    std::vector<Touched> touched;
    for (const auto& f : commit.files) {
      auto it = live.find(f.path);
      if (it != live.end() && f.old_lines) touched.push_back({it->second, &f});
    }
    if (touched.empty()) continue;
    std::map<std::string, std::vector<std::string>> added;
    for (const auto& f : commit.files)
      if (f.new_lines) added[f.path] = added_lines(f.old_lines.value_or(kEmpty), *f.new_lines);
    auto successor = [&](const Touched& t, const FileChange& target) -> const std::vector<std::string>& {
      return target.path == t.change->path ? *target.new_lines : added.at(target.path);
    };

    std::set<std::size_t> split_set, merge_set;
    for (const auto& t : touched) {
      std::size_t hits = 0;
      for (const auto& f : commit.files)
        if (f.new_lines && line_containment(*t.change->old_lines, successor(t, f)) >= config.split_share) ++hits;
      if (hits >= 2) split_set.insert(t.lineage);
    }
    for (const auto& f : commit.files) {
      if (!f.new_lines) continue;
      std::vector<std::size_t> preds;
      for (const auto& t : touched)
        if (line_containment(*t.change->old_lines, successor(t, f)) >= config.split_share) preds.push_back(t.lineage);
      if (preds.size() >= 2) merge_set.insert(preds.begin(), preds.end());
    }
    auto end_lineage = [&](std::size_t idx, LineageStatus st) {
      auto& l = lineages[idx];
      l.status = st;
      l.ended_at = k;
      live.erase(l.timeline.back().second);
    };
    for (auto idx : split_set) end_lineage(idx, LineageStatus::ExcludedSplit);
    for (auto idx : merge_set)
      if (!split_set.count(idx)) end_lineage(idx, LineageStatus::ExcludedMerge);

    // Renames: greedy best-match pairing of deleted tracked files with added files.
    struct Candidate {
      double sim;
      std::string from, to;
      std::size_t lineage;
    };
    std::vector<Candidate> cands;
    std::vector<std::size_t> deleted;
    for (const auto& t : touched) {
      if (split_set.count(t.lineage) || merge_set.count(t.lineage) || t.change->new_lines) continue;
      deleted.push_back(t.lineage);
      for (const auto& f : commit.files) {
        if (f.old_lines || !f.new_lines) continue;
        const double sim = line_similarity(*t.change->old_lines, *f.new_lines);
        if (sim >= config.rename_similarity) cands.push_back({sim, t.change->path, f.path, t.lineage});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      return std::tie(a.from, a.to) < std::tie(b.from, b.to);
    });
    std::set<std::string> used_to;
    std::set<std::size_t> renamed;
    for (const auto& c : cands) {
      if (renamed.count(c.lineage) || used_to.count(c.to) || live.count(c.to)) continue;
      renamed.insert(c.lineage);
      used_to.insert(c.to);
      live.erase(c.from);
      live[c.to] = c.lineage;
      lineages[c.lineage].timeline.emplace_back(k, c.to);
    }
    for (auto idx : deleted)
      if (!renamed.count(idx)) end_lineage(idx, LineageStatus::Deleted);
  }
  return lineages;
}

std::map<std::size_t, ClassChurn> commit_class_churn(int k, const CommitRecord& commit,
                                                     const std::vector<ClassLineage>& lineages) {
  std::map<std::size_t, ClassChurn> out;
  for (std::size_t i = 0; i < lineages.size(); ++i) {
    const auto& l = lineages[i];
    if (l.status != LineageStatus::Tracked && l.status != LineageStatus::Deleted) continue;
    if (l.ended_at >= 0 && k >= l.ended_at) continue;
    const auto before = l.path_before(k);
    const auto after = l.path_after(k);
    if (!before || !after) continue;
    const FileChange* old_change = commit.find(*before);
    if (!old_change) continue;
    const FileChange* new_change = *after == *before ? old_change : commit.find(*after);
    if (!new_change || !old_change->old_lines || !new_change->new_lines) continue;
    if (old_change->binary || new_change->binary) continue;
    auto [ins, del] = line_diff(*old_change->old_lines, *new_change->new_lines);
    if (ins + del > 0) out[i] = {ins, del};
  }
  return out;
}

std::vector<StabilityOutcome> aggregate_stability(const std::string& project, const std::vector<ClassLineage>& lineages,
                                                  const std::vector<CommitRecord>& commits, bool include_deleted) {
  std::vector<StabilityOutcome> acc(lineages.size());
  for (std::size_t k = 0; k < commits.size(); ++k)
    for (const auto& [idx, ch] : commit_class_churn(static_cast<int>(k), commits[k], lineages)) {
      ++acc[idx].chf;
      acc[idx].chs += ch.added + ch.deleted;
    }
  std::vector<StabilityOutcome> out;
  for (std::size_t i = 0; i < lineages.size(); ++i) {
    const auto st = lineages[i].status;
    if (st != LineageStatus::Tracked && !(st == LineageStatus::Deleted && include_deleted)) continue;
    auto o = acc[i];
    o.project = project;
    o.focal = lineages[i].focal;
    o.status = st;
    out.push_back(std::move(o));
  }
  return out;
}

HistoryResult mine_history(const GitRepo& repo, const SourceCorpus& corpus, const std::string& snapshot,
                           const std::string& branch, int days, const LineageConfig& config, bool include_deleted) {
  HistoryResult r;
  r.window = make_window(repo, snapshot, branch, days);
  r.commits = enumerate_window_commits(repo, r.window);
  r.lineages = class_lineage(corpus, r.commits, config);
  r.outcomes = aggregate_stability(corpus.project, r.lineages, r.commits, include_deleted);
  for (const auto& c : r.commits) r.system_churn += c.total_churn();
  return r;
}

// --- export ------------------------------------------------------------------

const std::vector<std::string>& outcome_columns() {
  static const std::vector<std::string> cols = {"project", "class", "ChF", "ChS", "lineage_status"};
  return cols;
}

std::string outcomes_to_csv(const std::vector<StabilityOutcome>& rows) {
  std::string out = csv::row(outcome_columns());
  for (const auto& o : rows)
    out += csv::row({o.project, o.focal, std::to_string(o.chf), std::to_string(o.chs), std::string(to_string(o.status))});
  return out;
}

std::vector<StabilityOutcome> outcomes_from_csv(std::string_view text) {
  const auto t = csv::parse(text);
  const auto cp = t.column("project"), cc = t.column("class"), cf = t.column("ChF"), cs = t.column("ChS"),
             st = t.column("lineage_status");
  std::vector<StabilityOutcome> out;
  for (const auto& r : t.rows) {
    StabilityOutcome o;
    o.project = r.at(cp);
    o.focal = r.at(cc);
    o.chf = std::stoull(r.at(cf));
    o.chs = std::stoull(r.at(cs));
    o.status = parse_lineage_status(r.at(st));
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<SummaryRow> activity_summary(const std::vector<ProjectActivity>& projects) {
  if (projects.empty()) return {};
  auto describe = [](std::string name, std::vector<double> v) {
    std::sort(v.begin(), v.end());
    SummaryRow r;
    r.measure = std::move(name);
    r.min = v.front();
    r.max = v.back();
    const std::size_t n = v.size();
    r.median = n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    double ss = 0;
    for (double x : v) ss += (x - r.mean) * (x - r.mean);
    r.sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    return r;
  };
  std::vector<double> commits, churn;
  for (const auto& p : projects) {
    commits.push_back(static_cast<double>(p.commits));
    churn.push_back(static_cast<double>(p.churn));
  }
  return {describe("window_commits", commits), describe("system_churn", churn)};
}

std::string activity_summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = csv::row({"measure", "min", "max", "median", "mean", "sd"});
  for (const auto& r : rows)
    out += csv::row({r.measure, format_double(r.min), format_double(r.max), format_double(r.median),
                     format_double(r.mean), format_double(r.sd)});
  return out;
}

}  // namespace smellstab
