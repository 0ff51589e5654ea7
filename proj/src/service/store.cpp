#include "xids/service/store.hpp"

#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

namespace xids::service {

namespace fs = std::filesystem;

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

nlohmann::json to_json(const SessionRecord& r) {
  return {{"session_id", r.session_id},
          {"demographics", survey::to_json(r.demographics)},
          {"answers", r.answers},
          {"scenario_id", r.scenario_id},
          {"created_at", r.created_at},
          {"completed_at", r.completed_at}};
}

SessionRecord session_from_json(const nlohmann::json& j) {
  try {
    SessionRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.demographics = survey::demographics_from_json(j.value("demographics", nlohmann::json::object()));
    r.answers = j.value("answers", std::map<std::string, int>{});
    r.scenario_id = j.value("scenario_id", "");
    r.created_at = j.value("created_at", "");
    r.completed_at = j.value("completed_at", "");
    if (r.session_id.empty()) throw FormatError("empty session id");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("session record: ") + e.what());
  }
}

namespace {

std::string new_session_id() {
  static thread_local std::mt19937_64 rng(std::random_device{}() ^
                                          static_cast<std::uint64_t>(
                                              std::chrono::steady_clock::now().time_since_epoch().count()));
  std::ostringstream os;
  os << std::hex;
  for (int i = 0; i < 2; ++i) {
    const auto v = rng();
    for (int b = 60; b >= 0; b -= 4) os << ((v >> b) & 15);
  }
  return os.str();
}

}  // namespace

SessionStore::SessionStore(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  std::string text;
  if (fs::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw IoError("cannot read " + path_.string());
    std::ostringstream os;
    os << in.rdbuf();
    text = os.str();
  }

  std::size_t pos = 0;
  std::size_t good_end = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const bool last = nl == std::string::npos;
    const std::string line = text.substr(pos, last ? std::string::npos : nl - pos);
    ++line_no;
    const std::size_t next = last ? text.size() : nl + 1;
    const bool final_line = next >= text.size();
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      pos = next;
      if (!last) good_end = next;
      continue;
    }
    try {
      if (last) throw FormatError("no trailing newline");
      SessionRecord r = session_from_json(nlohmann::json::parse(line));
      if (!sessions_.count(r.session_id)) order_.push_back(r.session_id);
      sessions_[r.session_id] = std::move(r);
      good_end = next;
    } catch (const std::exception& e) {
      if (!final_line) {
        throw FormatError(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      ++dropped_;
    }
    pos = next;
  }

  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open " + path_.string() + ": " + std::strerror(errno));
  if (good_end < text.size()) {
    if (::ftruncate(fd_, static_cast<off_t>(good_end)) != 0 || ::fsync(fd_) != 0) {
      throw IoError("cannot truncate torn line in " + path_.string());
    }
  }
}

SessionStore::~SessionStore() {
  if (fd_ >= 0) ::close(fd_);
}

void SessionStore::append(const SessionRecord& r) {
  const std::string line = to_json(r).dump() + "\n";
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("append to " + path_.string() + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw IoError("fsync of " + path_.string() + " failed: " + std::strerror(errno));
}

SessionRecord SessionStore::create(const survey::Demographics& demographics, const std::string& scenario_id) {
  std::lock_guard lock(mu_);
  SessionRecord r;
  do {
    r.session_id = new_session_id();
  } while (sessions_.count(r.session_id));
  r.demographics = demographics;
  r.scenario_id = scenario_id;
  r.created_at = utc_timestamp();
  append(r);
  order_.push_back(r.session_id);
  sessions_[r.session_id] = r;
  return r;
}

SessionRecord SessionStore::update(const std::string& id, const std::map<std::string, int>& answers,
                                   const std::optional<survey::Demographics>& demographics,
                                   const std::optional<std::string>& scenario_id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("no session " + id);
  if (it->second.completed()) throw SessionCompleted("session " + id + " is completed");
  SessionRecord r = it->second;
  for (const auto& [item, v] : answers) r.answers[item] = v;
  if (demographics) r.demographics = *demographics;
  if (scenario_id) r.scenario_id = *scenario_id;
  append(r);
  it->second = std::move(r);
  return it->second;
}

SessionRecord SessionStore::complete(const std::string& id) {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession("no session " + id);
  if (it->second.completed()) throw SessionCompleted("session " + id + " is completed");
  SessionRecord r = it->second;
  r.completed_at = utc_timestamp();
  append(r);
  it->second = std::move(r);
  return it->second;
}

std::optional<SessionRecord> SessionStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::vector<SessionRecord> SessionStore::all() const {
  std::lock_guard lock(mu_);
  std::vector<SessionRecord> out;
  for (const auto& id : order_) out.push_back(sessions_.at(id));
  return out;
}

std::vector<SessionRecord> SessionStore::completed() const {
  std::lock_guard lock(mu_);
  std::vector<SessionRecord> out;
  for (const auto& id : order_) {
    if (sessions_.at(id).completed()) out.push_back(sessions_.at(id));
  }
  return out;
}

}  // namespace xids::service
