// service.hpp -- HTTP endpoints for the drawing game (detect + archive) and
// the click-line game.
//
//   POST /api/detect                     {"pattern": ..., "config": {...}}
//   POST /api/archive                    {"pattern", "config", "note"?, "parent"?}
//   GET  /api/archive?page=&per_page=    newest first
//   GET  /api/archive/{id}
//   GET  /api/archive/{id}/lineage       entry, parent, grandparent, ...
//   GET  /api/game/clickline/next?session=
//   POST /api/game/clickline/answer      {"session", "stimulus_id", "x", "y"}
#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <httplib.h>

#include "gestalt/io.hpp"
#include "gestalt/pipeline.hpp"
#include "gestalt/random.hpp"
#include "gestalt/stimulus.hpp"

namespace gestalt {

struct HttpError : std::runtime_error {
  int status;
  HttpError(int s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

struct Reply {
  int status = 200;
  std::string body;
};

inline Reply error_reply(int status, const std::string& msg) { return {status, dump(Json{{"error", msg}})}; }

// ---------------------------------------------------------------------------
// Archive
// ---------------------------------------------------------------------------

/// Append-only store: one JSON entry per line, in-memory index rebuilt on
/// construction. Appends go through a single writer lock.
class Archive {
 public:
  explicit Archive(std::string path) : path_(std::move(path)) { load(); }

  Archive(const Archive&) = delete;
  Archive& operator=(const Archive&) = delete;

  /// Assigns id and timestamp, writes the entry and returns it.
  Json append(Json entry) {
    std::lock_guard lock(mu_);
    if (entry.contains("parent") && !entry["parent"].is_null()) {
      const auto& parent = entry["parent"];
      if (!parent.is_string() || !index_.contains(parent.get<std::string>()))
        throw HttpError(404, "parent: unknown archive entry");
    }
    char id[32];
    std::snprintf(id, sizeof id, "e%06llu", static_cast<unsigned long long>(++last_id_));
    Json out{{"id", id}, {"timestamp", now_iso8601()}};
    for (auto& [k, v] : entry.items())
      if (k != "id" && k != "timestamp") out[k] = std::move(v);
    const std::string line = out.dump();
    {
      std::ofstream f(path_, std::ios::binary | std::ios::app);
      if (!f) throw HttpError(500, "archive: cannot open store");
      f << line << '\n';
      f.flush();
      if (!f) throw HttpError(500, "archive: write failed");
    }
    index_.emplace(out["id"].get<std::string>(), entries_.size());
    entries_.push_back(out);
    return out;
  }

  [[nodiscard]] std::optional<Json> get(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second];
  }

  /// Newest first; page numbers start at 1.
  [[nodiscard]] Json page(std::size_t page, std::size_t per_page) const {
    std::lock_guard lock(mu_);
    Json list = Json::array();
    const std::size_t total = entries_.size();
    const std::size_t skip = (page - 1) * per_page;
    for (std::size_t k = skip; k < total && k < skip + per_page; ++k) {
      const Json& e = entries_[total - 1 - k];
      Json s{{"id", e["id"]}, {"timestamp", e["timestamp"]}};
      s["parent"] = e.contains("parent") ? e["parent"] : Json(nullptr);
      if (e.contains("note")) s["note"] = e["note"];
      s["points"] = e["pattern"]["points"].size();
      s["detections"] = e["detections"].size();
      list.push_back(std::move(s));
    }
    return Json{{"page", page}, {"per_page", per_page}, {"total", total}, {"entries", std::move(list)}};
  }

  /// The entry followed by its ancestors.
  [[nodiscard]] std::optional<Json> lineage(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    Json chain = Json::array();
    // parents always precede their children in the log, so this terminates
    while (it != index_.end()) {
      const Json& e = entries_[it->second];
      chain.push_back(e);
      if (!e.contains("parent") || !e["parent"].is_string()) break;
      it = index_.find(e["parent"].get<std::string>());
    }
    return chain;
  }

  [[nodiscard]] std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }
  [[nodiscard]] std::size_t skipped_lines() const { return skipped_; }

 private:
  static std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  void load() {
    std::ifstream f(path_, std::ios::binary);
    if (!f) return;  // fresh store
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      Json e;
      try {
        e = Json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        ++skipped_;  // torn write at the tail
        continue;
      }
      if (!e.contains("id") || !e["id"].is_string()) {
        ++skipped_;
        continue;
      }
      const std::string id = e["id"].get<std::string>();
      if (id.size() > 1) last_id_ = std::max<std::uint64_t>(last_id_, std::strtoull(id.c_str() + 1, nullptr, 10));
      index_.emplace(id, entries_.size());
      entries_.push_back(std::move(e));
    }
  }

  std::string path_;
  mutable std::mutex mu_;
  std::vector<Json> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t last_id_ = 0;
  std::size_t skipped_ = 0;
};

// ---------------------------------------------------------------------------
// Click-line game
// ---------------------------------------------------------------------------

struct Tier {
  std::size_t length;
  double jitter;
};

/// Easiest first: long straight segments, then shorter and more jittered.
inline std::vector<Tier> default_tiers() {
  std::vector<Tier> t;
  for (std::size_t k = 0; k < 8; ++k) t.push_back({10 - k, kJitterLevels[k]});
  return t;
}

inline constexpr std::size_t kSequenceLength = 10;

/// 100 on the segment, falling linearly to 0 at d_max.
inline double clickline_score(double distance, double d_max) {
  if (!(d_max > 0.0)) throw std::invalid_argument("d_max must be positive");
  return 100.0 * std::max(0.0, 1.0 - distance / d_max);
}

/// Tier after a completed sequence: mean >= 70 moves up, <= 40 moves down.
inline std::size_t next_tier(std::size_t tier, double mean_score, std::size_t n_tiers) {
  if (mean_score >= 70.0 && tier + 1 < n_tiers) return tier + 1;
  if (mean_score <= 40.0 && tier > 0) return tier - 1;
  return tier;
}

struct ClicklineConfig {
  std::size_t n = 200;
  Domain domain{496.0, 496.0};
  std::vector<Tier> tiers = default_tiers();
  [[nodiscard]] double d_max() const { return domain.diagonal() / 4.0; }
};

struct ClicklineTrial {
  std::string stimulus_id;
  std::size_t tier = 0;
  GaborField field;
  PlantedSegment truth;
  std::optional<Point> click;
  double distance = 0.0;
  double score = 0.0;
};

struct ClicklineSession {
  std::mutex mu;
  std::uint64_t seed = 0;
  std::size_t tier = 0;
  std::size_t sequence = 0;
  std::vector<ClicklineTrial> trials;  // all trials, in order
  std::optional<std::size_t> pending;  // served, unanswered
};

// ---------------------------------------------------------------------------
// Service
// ---------------------------------------------------------------------------

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string archive_path = "gestalt-archive.ndjson";
  std::size_t n_cap = 2000;
  std::string static_dir;
  std::uint64_t seed = 0;  // session seeds; 0: nondeterministic
  unsigned threads = 1;
  ClicklineConfig clickline;
};

/// GESTALT_BIND (host:port), GESTALT_ARCHIVE, GESTALT_N_CAP, GESTALT_STATIC_DIR,
/// GESTALT_SEED override the defaults.
inline ServiceConfig config_from_env(ServiceConfig cfg = {}) {
  if (const char* b = std::getenv("GESTALT_BIND")) {
    const std::string s(b);
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("GESTALT_BIND: expected host:port");
    cfg.host = s.substr(0, colon);
    cfg.port = std::stoi(s.substr(colon + 1));
  }
  if (const char* a = std::getenv("GESTALT_ARCHIVE")) cfg.archive_path = a;
  if (const char* n = std::getenv("GESTALT_N_CAP")) cfg.n_cap = std::stoull(n);
  if (const char* d = std::getenv("GESTALT_STATIC_DIR")) cfg.static_dir = d;
  if (const char* s = std::getenv("GESTALT_SEED")) cfg.seed = std::stoull(s);
  return cfg;
}

class GameService {
 public:
  explicit GameService(ServiceConfig cfg)
      : cfg_(std::move(cfg)), archive_(cfg_.archive_path), seeds_(cfg_.seed != 0 ? cfg_.seed : std::random_device{}()) {}

  [[nodiscard]] const ServiceConfig& config() const { return cfg_; }
  [[nodiscard]] Archive& archive() { return archive_; }

  // --- drawing game ---------------------------------------------------------

  Reply detect(const std::string& body) const {
    return guarded([&] {
      const Json req = parse_json(body);
      return Reply{200, dump(run_detection(req).second)};
    });
  }

  Reply archive_post(const std::string& body) {
    return guarded([&] {
      const Json req = parse_json(body);
      auto [canonical, detections] = run_detection(req);
      Json entry = std::move(canonical);
      entry["detections"] = std::move(detections);
      if (req.contains("note")) {
        if (!req["note"].is_string()) throw SchemaError("note", "expected a string");
        entry["note"] = req["note"];
      }
      if (req.contains("parent") && !req["parent"].is_null()) {
        if (!req["parent"].is_string()) throw SchemaError("parent", "expected a string");
        entry["parent"] = req["parent"];
      }
      return Reply{201, dump(archive_.append(std::move(entry)))};
    });
  }

  Reply archive_list(const std::string& page, const std::string& per_page) const {
    return guarded([&] {
      const std::size_t p = page.empty() ? 1 : positive(page, "page");
      const std::size_t pp = per_page.empty() ? 20 : std::min<std::size_t>(positive(per_page, "per_page"), 200);
      return Reply{200, dump(archive_.page(p, pp))};
    });
  }

  Reply archive_get(const std::string& id) const {
    auto e = archive_.get(id);
    if (!e) return error_reply(404, "unknown archive entry '" + id + "'");
    return {200, dump(*e)};
  }

  Reply archive_lineage(const std::string& id) const {
    auto e = archive_.lineage(id);
    if (!e) return error_reply(404, "unknown archive entry '" + id + "'");
    return {200, dump(*e)};
  }

  // --- click-line game ------------------------------------------------------

  Reply clickline_next(const std::string& session_token) {
    return guarded([&] {
      auto [token, session] = session_for(session_token, true);
      std::lock_guard lock(session->mu);
      if (!session->pending) serve(*session);
      const ClicklineTrial& t = session->trials[*session->pending];
      const std::size_t index = *session->pending % kSequenceLength;
      Json stim = to_json(t.field);  // positions and orientations only
      Json out{{"session", token},
               {"stimulus_id", t.stimulus_id},
               {"sequence", session->sequence},
               {"index", index},
               {"tier", t.tier},
               {"training", session->sequence == 0},
               {"stimulus", std::move(stim)}};
      return Reply{200, dump(out)};
    });
  }

  Reply clickline_answer(const std::string& body) {
    return guarded([&] {
      const Json req = parse_json(body);
      const Json& tok = detail::member(req, "session", "");
      if (!tok.is_string()) throw SchemaError("session", "expected a string");
      const Json& sid = detail::member(req, "stimulus_id", "");
      if (!sid.is_string()) throw SchemaError("stimulus_id", "expected a string");
      const Point click{detail::number(detail::member(req, "x", ""), "x"), detail::number(detail::member(req, "y", ""), "y")};
      auto [token, session] = session_for(tok.get<std::string>(), false);
      std::lock_guard lock(session->mu);
      if (!session->pending || session->trials[*session->pending].stimulus_id != sid.get<std::string>())
        throw HttpError(409, "stimulus '" + sid.get<std::string>() + "' is not awaiting an answer");
      const Domain& dom = cfg_.clickline.domain;
      if (!(click.x >= 0.0 && click.x <= dom.width && click.y >= 0.0 && click.y <= dom.height))
        throw HttpError(400, "click outside the stimulus domain");

      const std::size_t k = *session->pending;
      ClicklineTrial& t = session->trials[k];
      t.click = click;
      t.distance = point_segment_distance(click, t.truth.a, t.truth.b);
      t.score = clickline_score(t.distance, cfg_.clickline.d_max());
      session->pending.reset();

      Json out{{"session", token},
               {"stimulus_id", t.stimulus_id},
               {"distance", num(t.distance)},
               {"score", num(t.score)},
               {"d_max", num(cfg_.clickline.d_max())},
               {"truth", Json{{"a", Json::array({num(t.truth.a.x), num(t.truth.a.y)})},
                              {"b", Json::array({num(t.truth.b.x), num(t.truth.b.y)})}}}};
      const bool done = (k + 1) % kSequenceLength == 0;
      out["sequence_complete"] = done;
      if (done) {
        double sum = 0.0;
        Json scores = Json::array();
        for (std::size_t m = k + 1 - kSequenceLength; m <= k; ++m) {
          sum += session->trials[m].score;
          scores.push_back(num(session->trials[m].score));
        }
        const double mean = sum / static_cast<double>(kSequenceLength);
        session->tier = next_tier(session->tier, mean, cfg_.clickline.tiers.size());
        ++session->sequence;
        out["sequence_scores"] = std::move(scores);
        out["sequence_mean"] = num(mean);
      }
      out["tier"] = session->tier;
      return Reply{200, dump(out)};
    });
  }

  /// Registers every route on `server`.
  void mount(httplib::Server& server) {
    server.set_payload_max_length(64ull << 20);
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Post("/api/detect", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, detect(req.body)); });
    server.Post("/api/archive", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, archive_post(req.body)); });
    server.Get("/api/archive", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, archive_list(req.get_param_value("page"), req.get_param_value("per_page")));
    });
    server.Get(R"(/api/archive/([A-Za-z0-9_-]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, archive_get(req.matches[1]));
    });
    server.Get(R"(/api/archive/([A-Za-z0-9_-]+)/lineage)", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, archive_lineage(req.matches[1]));
    });
    server.Get("/api/game/clickline/next", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, clickline_next(req.get_param_value("session")));
    });
    server.Post("/api/game/clickline/answer", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, clickline_answer(req.body));
    });
    if (!cfg_.static_dir.empty() && !server.set_mount_point("/", cfg_.static_dir))
      throw std::runtime_error("static directory '" + cfg_.static_dir + "' not found");
  }

 private:
  template <class Fn>
  static Reply guarded(Fn&& fn) {
    try {
      return fn();
    } catch (const HttpError& e) {
      return error_reply(e.status, e.what());
    } catch (const SchemaError& e) {
      return error_reply(400, e.what());
    } catch (const std::invalid_argument& e) {
      return error_reply(400, e.what());
    } catch (const std::exception& e) {
      return error_reply(500, e.what());
    }
  }

  static std::size_t positive(const std::string& s, const char* name) {
    std::size_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || v == 0)
      throw SchemaError(name, "expected a positive integer");
    return v;
  }

  // Parses {"pattern", "config"}, enforces the size cap and runs the shared
  // pipeline. Returns the canonical request (re-serialized) and the result.
  std::pair<Json, Json> run_detection(const Json& req) const {
    const Json& pj = detail::member(req, "pattern", "");
    const DetectRequest dr = request_from_json(req.contains("config") ? req["config"] : Json(nullptr));
    const bool gabor = pj.is_object() && pj.contains("elements");
    const std::size_t n = gabor ? detail::array(detail::member(pj, "elements", "pattern"), "pattern.elements").size()
                                : detail::array(detail::member(pj, "points", "pattern"), "pattern.points").size();
    if (n > cfg_.n_cap)
      throw HttpError(413, "pattern has " + std::to_string(n) + " elements; the limit is " + std::to_string(cfg_.n_cap));
    DetectRequest run = dr;
    run.threads = cfg_.threads;
    if (gabor) {
      const GaborField f = field_from_json(pj);
      if (f.size() < 2) throw SchemaError("elements", "at least 2 required");
      return {Json{{"pattern", to_json(f)}, {"config", to_json(dr)}}, detect_document(f, run)};
    }
    const DotPattern p = pattern_from_json(pj);
    if (p.size() < 2) throw SchemaError("points", "at least 2 required");
    return {Json{{"pattern", to_json(p)}, {"config", to_json(dr)}}, detect_document(p, run)};
  }

  std::pair<std::string, std::shared_ptr<ClicklineSession>> session_for(const std::string& token, bool create) {
    std::lock_guard lock(sessions_mu_);
    if (!token.empty()) {
      const auto it = sessions_.find(token);
      if (it == sessions_.end()) throw HttpError(404, "unknown session");
      return *it;
    }
    if (!create) throw SchemaError("session", "missing");
    auto s = std::make_shared<ClicklineSession>();
    s->seed = seeds_.next_u64();
    char buf[24];
    std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(seeds_.next_u64()));
    sessions_.emplace(buf, s);
    return {buf, s};
  }

  StimulusSpec trial_spec(const ClicklineSession& s, std::size_t k, std::size_t tier) const {
    StimulusSpec spec;
    spec.kind = StimulusKind::positive;
    spec.n = cfg_.clickline.n;
    spec.domain = cfg_.clickline.domain;
    spec.length = cfg_.clickline.tiers.at(tier).length;
    spec.jitter = cfg_.clickline.tiers.at(tier).jitter;
    spec.seed = derive_seed(s.seed, k);
    return spec;
  }

  void serve(ClicklineSession& s) {
    const std::size_t k = s.trials.size();
    const StimulusRecord rec = generate(trial_spec(s, k, s.tier));
    char id[48];
    std::snprintf(id, sizeof id, "c%zu-%zu", s.sequence, k);
    s.trials.push_back({id, s.tier, rec.field, *rec.truth, std::nullopt, 0.0, 0.0});
    s.pending = k;
  }

  ServiceConfig cfg_;
  Archive archive_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<ClicklineSession>> sessions_;
  Rng seeds_;
};

}  // namespace gestalt
