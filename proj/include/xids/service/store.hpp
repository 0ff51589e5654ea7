#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xids/error.hpp"
#include "xids/survey/survey.hpp"

namespace xids::service {

XIDS_DEFINE_ERROR(UnknownSession);
XIDS_DEFINE_ERROR(SessionCompleted);

struct SessionRecord {
  std::string session_id;
  survey::Demographics demographics;
  std::map<std::string, int> answers;
  std::string scenario_id;
  std::string created_at;
  std::string completed_at;  // empty while open

  bool completed() const { return !completed_at.empty(); }
  survey::SurveyResponse response() const { return {session_id, demographics, answers}; }
};

nlohmann::json to_json(const SessionRecord& r);
SessionRecord session_from_json(const nlohmann::json& j);

// Append-only JSON-lines file; every line is a full snapshot of one session
// and the last snapshot of a session wins. Each change is written and
// fsync'ed before the call returns. A torn final line (crash mid-append) is
// dropped and truncated away when the store is opened; a bad line anywhere
// else is a FormatError.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path path);
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  SessionRecord create(const survey::Demographics& demographics, const std::string& scenario_id);
  // Merges answers (and demographics / scenario when given). Throws
  // UnknownSession or SessionCompleted.
  SessionRecord update(const std::string& id, const std::map<std::string, int>& answers,
                       const std::optional<survey::Demographics>& demographics = std::nullopt,
                       const std::optional<std::string>& scenario_id = std::nullopt);
  SessionRecord complete(const std::string& id);

  std::optional<SessionRecord> get(const std::string& id) const;
  std::vector<SessionRecord> all() const;        // creation order
  std::vector<SessionRecord> completed() const;  // creation order
  std::size_t dropped_lines() const { return dropped_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  void append(const SessionRecord& r);

  std::filesystem::path path_;
  int fd_ = -1;
  mutable std::mutex mu_;
  std::map<std::string, SessionRecord> sessions_;
  std::vector<std::string> order_;
  std::size_t dropped_ = 0;
};

std::string utc_timestamp();

}  // namespace xids::service
