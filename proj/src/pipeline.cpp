#include "smellstab/pipeline.hpp"

#include <algorithm>
#include <json.hpp>
#include <mutex>
#include <set>
#include <sstream>

#include "smellstab/code_model.hpp"
#include "smellstab/dependency_graph.hpp"
#include "smellstab/util.hpp"

namespace smellstab {

namespace fs = std::filesystem;

// --- manifest ----------------------------------------------------------------

namespace {

std::optional<double> opt_number(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number())
    throw std::invalid_argument("manifest line " + std::to_string(line) + ": " + key + " is not a number");
  return j[key].get<double>();
}

std::string opt_string(const nlohmann::json& j, const char* key, std::size_t line, std::string fallback = {}) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  if (!j[key].is_string())
    throw std::invalid_argument("manifest line " + std::to_string(line) + ": " + key + " is not a string");
  return j[key].get<std::string>();
}

}  // namespace

std::vector<ManifestEntry> parse_manifest(std::string_view jsonl) {
  std::vector<ManifestEntry> out;
  std::size_t line_no = 0;
  for (const auto& raw : split(jsonl, '\n')) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": not an object");
    ManifestEntry e;
    e.repo = opt_string(j, "repo", line_no);
    if (e.repo.empty()) throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": missing repo");
    e.stars = opt_number(j, "stars", line_no);
    e.forks = opt_number(j, "forks", line_no);
    e.contributors = opt_number(j, "contributors", line_no);
    e.java_fraction = opt_number(j, "java_fraction", line_no);
    e.window_commits = opt_number(j, "window_commits", line_no);
    if (j.contains("education_flag") && !j["education_flag"].is_null()) {
      if (!j["education_flag"].is_boolean())
        throw std::invalid_argument("manifest line " + std::to_string(line_no) + ": education_flag is not a boolean");
      e.education_flag = j["education_flag"].get<bool>();
    }
    e.clone_path = opt_string(j, "clone_path", line_no);
    e.snapshot = opt_string(j, "snapshot", line_no);
    e.branch = opt_string(j, "branch", line_no, "main");
    e.source_root = opt_string(j, "source_root", line_no);
    out.push_back(std::move(e));
  }
  return out;
}

std::string manifest_line(const ManifestEntry& e) {
  nlohmann::ordered_json j;
  j["repo"] = e.repo;
  auto put = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  put("stars", e.stars);
  put("forks", e.forks);
  put("contributors", e.contributors);
  put("java_fraction", e.java_fraction);
  put("window_commits", e.window_commits);
  if (e.education_flag) j["education_flag"] = *e.education_flag;
  j["clone_path"] = e.clone_path;
  j["snapshot"] = e.snapshot;
  j["branch"] = e.branch;
  if (!e.source_root.empty()) j["source_root"] = e.source_root;
  return j.dump();
}

FilterResult filter_manifest(const std::vector<ManifestEntry>& entries, std::size_t limit) {
  FilterResult r;
  std::vector<std::size_t> qualifying;
  std::vector<std::vector<std::string>> reasons(entries.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    auto& why = reasons[i];
    if (!seen.insert(e.repo).second) {
      why.push_back("duplicate");
      continue;
    }
    if (!e.stars || !e.forks || !e.contributors || !e.java_fraction || !e.window_commits || !e.education_flag) {
      why.push_back("incomplete");
      continue;
    }
    if (!(*e.forks > 100)) why.push_back("IC1");
    if (!(*e.contributors >= 20)) why.push_back("IC2");
    if (!(*e.window_commits >= 50)) why.push_back("IC3");
    if (!(*e.java_fraction > 0.8)) why.push_back("IC4");
    if (*e.education_flag) why.push_back("IC5");
    if (why.empty()) qualifying.push_back(i);
  }
  std::stable_sort(qualifying.begin(), qualifying.end(), [&](std::size_t a, std::size_t b) {
    if (*entries[a].stars != *entries[b].stars) return *entries[a].stars > *entries[b].stars;
    return entries[a].repo < entries[b].repo;
  });
  for (std::size_t k = 0; k < qualifying.size(); ++k) {
    if (k < limit)
      r.accepted.push_back(entries[qualifying[k]]);
    else
      reasons[qualifying[k]].push_back("rank");
  }
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (!reasons[i].empty()) r.rejected.push_back({entries[i], reasons[i]});
  return r;
}

std::string rejections_to_csv(const std::vector<Rejection>& rejected) {
  std::string out = csv::row({"repo", "reasons"});
  for (const auto& r : rejected) out += csv::row({r.entry.repo, join(r.reasons, ";")});
  return out;
}

// --- configuration -------------------------------------------------------------

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("non-boolean value for " + key + ": " + v);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out{};
    if constexpr (std::is_floating_point_v<T>) {
      out = static_cast<T>(std::stod(v, &used));
    } else {
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      out = static_cast<T>(std::stoull(v, &used));
    }
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": " + v);
  }
}

const std::set<std::string>& pipeline_keys() {
  static const std::set<std::string> keys = {"manifest",      "output_dir",      "workers",
                                             "seed",          "window_days",     "rename_similarity",
                                             "split_share",   "limit",           "include_deleted",
                                             "exclude_test_dirs", "residuals"};
  return keys;
}

}  // namespace

PipelineConfig PipelineConfig::parse(std::string_view text) {
  PipelineConfig c;
  std::string threshold_text;
  bool echo_seen = false;
  for (const auto& raw : split(text, '\n')) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      line = trim(std::string_view(line).substr(1));
      if (!starts_with(line, "cfg ")) continue;
      line = trim(std::string_view(line).substr(4));
      echo_seen = true;
    } else if (starts_with(line, "cfg ")) {
      line = trim(std::string_view(line).substr(4));
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (echo_seen) break;  // header of the CSV the echo lines came from
      throw ConfigError("malformed config line: " + line);
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!pipeline_keys().count(key)) {
      threshold_text += key + "=" + value + "\n";
      continue;
    }
    if (key == "manifest") c.manifest = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "workers") c.workers = std::max(1u, parse_number<unsigned>(key, value));
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "window_days") {
      c.window_days = static_cast<int>(parse_number<unsigned>(key, value));
      if (c.window_days <= 0) throw ConfigError("window_days must be positive");
    } else if (key == "rename_similarity" || key == "split_share") {
      const double v = parse_number<double>(key, value);
      if (!(v > 0 && v <= 1)) throw ConfigError(key + " must be in (0, 1]");
      (key == "rename_similarity" ? c.rename_similarity : c.split_share) = v;
    } else if (key == "limit") c.limit = parse_number<std::size_t>(key, value);
    else if (key == "include_deleted") c.include_deleted = parse_bool(key, value);
    else if (key == "exclude_test_dirs") c.exclude_test_dirs = parse_bool(key, value);
    else if (key == "residuals") c.residuals = parse_bool(key, value);
  }
  c.thresholds = ThresholdConfig::parse(threshold_text);
  return c;
}

std::vector<std::string> PipelineConfig::echo_lines() const {
  std::vector<std::string> out = {
      "exclude_test_dirs=" + std::string(exclude_test_dirs ? "true" : "false"),
      "include_deleted=" + std::string(include_deleted ? "true" : "false"),
      "limit=" + std::to_string(limit),
      "rename_similarity=" + format_double(rename_similarity),
      "residuals=" + std::string(residuals ? "true" : "false"),
      "seed=" + std::to_string(seed),
      "split_share=" + format_double(split_share),
      "window_days=" + std::to_string(window_days),
  };
  for (const auto& l : thresholds.echo_lines()) out.push_back(l);
  return out;
}

std::string PipelineConfig::serialize() const {
  std::string out = "manifest=" + manifest + "\noutput_dir=" + output_dir + "\nworkers=" + std::to_string(workers) + "\n";
  for (const auto& l : echo_lines()) out += l + "\n";
  return out;
}

std::uint64_t PipelineConfig::analysis_hash() const {
  return fnv1a64(std::string(exclude_test_dirs ? "tests-excluded" : "tests-included"), thresholds.hash());
}

std::uint64_t PipelineConfig::mining_hash() const {
  return fnv1a64("window_days=" + std::to_string(window_days) + ";rename=" + format_double(rename_similarity) +
                 ";split=" + format_double(split_share) + ";deleted=" + (include_deleted ? "1" : "0"));
}

// --- snapshot sources ----------------------------------------------------------

std::map<std::string, std::string> snapshot_sources(const GitRepo& repo, const std::string& snapshot,
                                                    const std::string& source_root) {
  std::string root = source_root;
  while (!root.empty() && root.back() == '/') root.pop_back();
  std::vector<std::string> args = {"ls-tree", "-r", "-z", "--name-only", snapshot};
  if (!root.empty()) args.insert(args.end(), {"--", root});
  const std::string listing = repo.run(args);
  std::map<std::string, std::string> out;
  for (const auto& path : split(listing, '\0')) {
    if (path.size() < 5 || path.substr(path.size() - 5) != ".java") continue;
    std::string rel = path;
    if (!root.empty()) {
      if (!starts_with(path, root + "/")) continue;
      rel = path.substr(root.size() + 1);
    }
    out[rel] = repo.run({"cat-file", "blob", snapshot + ":" + path});
  }
  return out;
}

// --- dataset -------------------------------------------------------------------

std::vector<DatasetRow> export_dataset(const std::vector<ClassObservation>& observations,
                                       const std::vector<StabilityOutcome>& outcomes) {
  std::map<std::pair<std::string, std::string>, const StabilityOutcome*> by_key;
  for (const auto& o : outcomes)
    if (!by_key.emplace(std::make_pair(o.project, o.focal), &o).second)
      throw IntegrityError("duplicate outcome for " + o.project + " " + o.focal);
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<DatasetRow> out;
  for (const auto& obs : observations) {
    const auto key = std::make_pair(obs.project, obs.focal);
    if (!seen.insert(key).second) throw IntegrityError("duplicate observation for " + obs.project + " " + obs.focal);
    const auto it = by_key.find(key);
    if (it == by_key.end()) continue;
    out.push_back({obs, it->second->chf, it->second->chs, it->second->status});
  }
  for (const auto& [key, o] : by_key)
    if (!seen.count(key)) throw IntegrityError("outcome without observation for " + key.first + " " + key.second);
  return out;
}

const std::vector<std::string>& dataset_columns() {
  static const std::vector<std::string> cols = [] {
    auto c = observation_columns();
    c.insert(c.end(), {"ChF", "ChS", "lineage_status"});
    return c;
  }();
  return cols;
}

std::string dataset_to_csv(const std::vector<DatasetRow>& rows, const std::vector<std::string>& echo) {
  std::string out;
  for (const auto& l : echo) out += "# cfg " + l + "\n";
  out += csv::row(dataset_columns());
  for (const auto& r : rows) {
    auto fields = observation_row(r.obs);
    fields.push_back(std::to_string(r.chf));
    fields.push_back(std::to_string(r.chs));
    fields.emplace_back(to_string(r.status));
    out += csv::row(fields);
  }
  return out;
}

std::vector<DatasetRow> dataset_rows_from_csv(std::string_view text) {
  const auto t = csv::parse(text);
  const auto cf = t.column("ChF"), cs = t.column("ChS"), st = t.column("lineage_status");
  std::vector<DatasetRow> out;
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw std::invalid_argument("dataset row has " + std::to_string(r.size()) + " cells");
    DatasetRow d;
    d.obs = observation_from_row(t.header, r);
    d.chf = parse_number<std::size_t>("ChF", r[cf]);
    d.chs = parse_number<std::size_t>("ChS", r[cs]);
    d.status = parse_lineage_status(r[st]);
    out.push_back(std::move(d));
  }
  return out;
}

std::string quarantine_to_csv(const std::vector<QuarantineEntry>& rows) {
  std::string out = csv::row({"project", "stage", "message"});
  for (const auto& q : rows) out += csv::row({q.project, q.stage, q.message});
  return out;
}

// --- pipeline --------------------------------------------------------------------

std::string project_slug(const std::string& repo) {
  std::string s;
  for (char c : repo) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return s;
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {}

namespace {

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return trim(s);
}

std::string read_if_exists(const fs::path& p) { return fs::exists(p) ? read_file(p) : std::string(); }

}  // namespace

FilterResult Pipeline::filter() {
  const fs::path manifest = fs::absolute(config_.manifest);
  auto entries = parse_manifest(read_file(manifest));
  for (auto& e : entries)
    if (!e.clone_path.empty() && fs::path(e.clone_path).is_relative())
      e.clone_path = (manifest.parent_path() / e.clone_path).lexically_normal().string();
  auto result = filter_manifest(entries, config_.limit);
  std::set<std::string> slugs;
  for (const auto& e : result.accepted)
    if (!slugs.insert(project_slug(e.repo)).second)
      throw IntegrityError("project slug collision for " + e.repo);
  fs::create_directories(out());
  std::string accepted;
  for (const auto& e : result.accepted) accepted += manifest_line(e) + "\n";
  write_file(out() / "config.echo", config_.serialize());
  write_file(out() / "accepted.jsonl", accepted);
  write_file(out() / "rejected.csv", rejections_to_csv(result.rejected));
  return result;
}

std::vector<ManifestEntry> Pipeline::accepted() const {
  const fs::path p = out() / "accepted.jsonl";
  if (!fs::exists(p)) throw std::runtime_error("missing " + p.string() + "; run the filter stage first");
  return parse_manifest(read_file(p));
}

fs::path Pipeline::project_dir(const ManifestEntry& e) const { return out() / "projects" / project_slug(e.repo); }

void Pipeline::record_failure(const ManifestEntry& e, const std::string& stage, const std::string& message) const {
  fs::create_directories(project_dir(e));
  write_file(project_dir(e) / "failed", stage + "\t" + one_line(message) + "\n");
}

bool Pipeline::failed(const ManifestEntry& e) const { return fs::exists(project_dir(e) / "failed"); }

std::vector<QuarantineEntry> Pipeline::quarantine() const {
  std::vector<QuarantineEntry> out;
  for (const auto& e : accepted()) {
    const fs::path p = project_dir(e) / "failed";
    if (!fs::exists(p)) continue;
    const std::string text = trim(read_file(p));
    const auto tab = text.find('\t');
    out.push_back({e.repo, text.substr(0, tab), tab == std::string::npos ? "" : text.substr(tab + 1)});
  }
  return out;
}

namespace {

std::string resolve_commit(const GitRepo& repo, const std::string& rev) {
  if (rev.empty()) throw HistoryError("no snapshot revision given");
  const auto sha = repo.try_run({"rev-parse", "--verify", "--quiet", rev + "^{commit}"});
  if (!sha) throw HistoryError("unknown revision " + rev);
  return trim(*sha);
}

GitRepo open_repo(const ManifestEntry& e) {
  if (e.clone_path.empty() || !fs::is_directory(e.clone_path))
    throw HistoryError("clone path is not a directory: " + e.clone_path);
  return GitRepo(e.clone_path);
}

SourceCorpus load_corpus(const GitRepo& repo, const ManifestEntry& e, const std::string& sha,
                         const PipelineConfig& cfg) {
  IngestOptions opts;
  opts.project = e.repo;
  opts.exclude_test_dirs = cfg.exclude_test_dirs;
  return ingest_sources(snapshot_sources(repo, sha, e.source_root), sha, opts);
}

bool stamp_matches(const fs::path& stamp, const std::string& key, std::initializer_list<const char*> outputs) {
  if (read_if_exists(stamp) != key) return false;
  for (const char* o : outputs)
    if (!fs::exists(stamp.parent_path() / o)) return false;
  return true;
}

}  // namespace

void Pipeline::analyze_project(const ManifestEntry& e) const {
  const fs::path dir = project_dir(e);
  fs::create_directories(dir);
  fs::remove(dir / "failed");
  const GitRepo repo = open_repo(e);
  const std::string sha = resolve_commit(repo, e.snapshot);
  const std::string key = hex64(fnv1a64(sha + "|" + e.source_root, config_.analysis_hash())) + "\n";
  if (stamp_matches(dir / "analyze.key", key, {"observations.csv", "smells.csv", "metrics.csv", "edges.csv"})) return;
  fs::remove(dir / "analyze.key");
  const auto corpus = load_corpus(repo, e, sha, config_);
  const auto graph = extract_dependencies(corpus);
  const auto report = detect_smells(corpus, graph, config_.thresholds);
  const auto obs = build_observations(corpus, graph, report.instances);
  write_file(dir / "observations.csv", observations_to_csv(obs, config_.echo_lines()));
  write_file(dir / "smells.csv", smells_to_csv(corpus, report.instances, config_.thresholds));
  write_file(dir / "metrics.csv", metrics_to_csv(corpus, graph, config_.thresholds));
  write_file(dir / "edges.csv", edges_to_csv(graph, corpus));
  write_file(dir / "analyze.key", key);
}

void Pipeline::mine_project(const ManifestEntry& e) const {
  const fs::path dir = project_dir(e);
  const GitRepo repo = open_repo(e);
  const std::string sha = resolve_commit(repo, e.snapshot);
  const std::string tip = resolve_commit(repo, e.branch);
  const std::string key =
      hex64(fnv1a64(sha + "|" + tip + "|" + e.branch + "|" + e.source_root, config_.mining_hash())) + "\n";
  if (stamp_matches(dir / "mine.key", key, {"outcomes.csv", "activity.csv"})) return;
  fs::remove(dir / "mine.key");
  const auto corpus = load_corpus(repo, e, sha, config_);
  LineageConfig lc;
  lc.rename_similarity = config_.rename_similarity;
  lc.split_share = config_.split_share;
  lc.source_root = e.source_root;
  const auto h = mine_history(repo, corpus, sha, e.branch, config_.window_days, lc, config_.include_deleted);
  write_file(dir / "outcomes.csv", outcomes_to_csv(h.outcomes));
  write_file(dir / "activity.csv", csv::row({"project", "window_commits", "system_churn"}) +
                                       csv::row({e.repo, std::to_string(h.commits.size()),
                                                 std::to_string(h.system_churn)}));
  write_file(dir / "mine.key", key);
}

void Pipeline::analyze() {
  const auto projects = accepted();
  parallel_for(projects.size(), config_.workers, [&](std::size_t i) {
    try {
      analyze_project(projects[i]);
    } catch (const std::exception& ex) {
      record_failure(projects[i], "analyze", ex.what());
    }
  });
}

void Pipeline::mine() {
  const auto projects = accepted();
  parallel_for(projects.size(), config_.workers, [&](std::size_t i) {
    const fs::path marker = project_dir(projects[i]) / "failed";
    if (fs::exists(marker)) {
      if (!starts_with(read_file(marker), "mine\t")) return;  // analyze failed: nothing to mine
      fs::remove(marker);
    }
    try {
      mine_project(projects[i]);
    } catch (const std::exception& ex) {
      record_failure(projects[i], "mine", ex.what());
    }
  });
}

void Pipeline::join() {
  std::vector<DatasetRow> rows;
  std::string listing = csv::row({"project", "status", "classes", "dataset_rows"});
  for (const auto& e : accepted()) {
    if (!failed(e)) {
      const fs::path dir = project_dir(e);
      if (!fs::exists(dir / "observations.csv") || !fs::exists(dir / "outcomes.csv")) {
        record_failure(e, "join", "missing analyze or mine output");
      } else {
        const auto t = csv::parse(read_file(dir / "observations.csv"));
        std::vector<ClassObservation> obs;
        for (const auto& r : t.rows) obs.push_back(observation_from_row(t.header, r));
        const auto part = export_dataset(obs, outcomes_from_csv(read_file(dir / "outcomes.csv")));
        for (const auto& r : part)
          if (r.obs.project != e.repo) throw IntegrityError("row of " + r.obs.project + " found under " + e.repo);
        listing += csv::row({e.repo, "ok", std::to_string(obs.size()), std::to_string(part.size())});
        rows.insert(rows.end(), part.begin(), part.end());
        continue;
      }
    }
    listing += csv::row({e.repo, "quarantined", "0", "0"});
  }
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& r : rows)
    if (!keys.insert({r.obs.project, r.obs.focal}).second)
      throw IntegrityError("duplicate dataset key " + r.obs.project + " " + r.obs.focal);
  write_file(out() / "dataset.csv", dataset_to_csv(rows, config_.echo_lines()));
  write_file(out() / "projects.csv", listing);
  write_file(out() / "quarantine.csv", quarantine_to_csv(quarantine()));
}

void Pipeline::stats() {
  const fs::path p = out() / "dataset.csv";
  if (!fs::exists(p)) throw std::runtime_error("missing " + p.string() + "; run the join stage first");
  SuiteOptions opts;
  opts.workers = config_.workers;
  opts.seed = config_.seed;
  opts.residuals = config_.residuals;
  const auto res = run_hypothesis_suite(dataset_from_csv(read_file(p)), opts);
  std::string echo;
  for (const auto& l : config_.echo_lines()) echo += "# cfg " + l + "\n";
  write_file(out() / "results.csv", echo + results_to_csv(res));
  write_file(out() / "results.json", results_to_json(res));
}

void Pipeline::report() {
  std::vector<ProjectActivity> activity;
  for (const auto& e : accepted()) {
    if (failed(e)) continue;
    const fs::path p = project_dir(e) / "activity.csv";
    if (!fs::exists(p)) continue;
    const auto t = csv::parse(read_file(p));
    for (const auto& r : t.rows)
      activity.push_back({r[t.column("project")], parse_number<std::size_t>("window_commits", r[t.column("window_commits")]),
                          parse_number<std::size_t>("system_churn", r[t.column("system_churn")])});
  }
  write_file(out() / "activity_summary.csv", activity_summary_csv(activity_summary(activity)));
  const auto q = quarantine();
  write_file(out() / "quarantine.csv", quarantine_to_csv(q));

  std::ostringstream md;
  md << "# smellstab report\n\n";
  md << "Projects analyzed: " << activity.size() << "\n\nProjects quarantined: " << q.size() << "\n\n";
  const fs::path results = out() / "results.csv";
  if (fs::exists(results)) {
    const auto t = csv::parse(read_file(results));
    md << "| hypothesis | dv | beta | p_bh | IRR | verdict | n |\n|---|---|---|---|---|---|---|\n";
    for (const auto& r : t.rows)
      md << "| " << r[t.column("hypothesis")] << " | " << r[t.column("dv")] << " | " << r[t.column("beta")] << " | "
         << r[t.column("p_bh")] << " | " << r[t.column("irr")] << " | " << r[t.column("verdict")] << " | "
         << r[t.column("n")] << " |\n";
  } else {
    md << "No results: the stats stage has not run.\n";
  }
  if (!q.empty()) {
    md << "\n## Quarantine\n\n";
    for (const auto& e : q) md << "- " << e.project << " (" << e.stage << "): " << e.message << "\n";
  }
  write_file(out() / "report.md", md.str());
}

void Pipeline::run_all() {
  filter();
  analyze();
  mine();
  join();
  stats();
  report();
}

}  // namespace smellstab
