#include "xids/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

#include "xids/data/schema.hpp"
#include "xids/error.hpp"
#include "xids/random.hpp"

namespace xids::data {
namespace {

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& options, Rng& rng) {
  return options[bounded(rng, N)];
}

std::string rate(double v) {
  v = std::clamp(v, 0.0, 1.0);
  std::ostringstream s;
  s.precision(2);
  s << std::fixed << v;
  std::string out = s.str();
  // The public files write 0 and 1 without decimals.
  if (out == "0.00") return "0";
  if (out == "1.00") return "1";
  return out;
}

std::string count(double v) { return std::to_string(static_cast<long long>(std::max(0.0, std::round(v)))); }

struct Row {
  double duration = 0;
  std::string_view protocol = "tcp", service = "http", flag = "SF";
  double src_bytes = 0, dst_bytes = 0;
  int land = 0, wrong_fragment = 0, urgent = 0, hot = 0, num_failed_logins = 0, logged_in = 0;
  int num_compromised = 0, root_shell = 0, su_attempted = 0, num_root = 0, num_file_creations = 0;
  int num_shells = 0, num_access_files = 0, is_guest_login = 0;
  double cnt = 1, srv_count = 1;
  double serror = 0, srv_serror = 0, rerror = 0, srv_rerror = 0, same_srv = 1, diff_srv = 0, srv_diff_host = 0;
  double dh_count = 255, dh_srv_count = 255, dh_same_srv = 1, dh_diff_srv = 0, dh_same_src_port = 0;
  double dh_srv_diff_host = 0, dh_serror = 0, dh_srv_serror = 0, dh_rerror = 0, dh_srv_rerror = 0;

  std::string line(std::string_view label, int difficulty) const {
    std::ostringstream s;
    s << count(duration) << ',' << protocol << ',' << service << ',' << flag << ',' << count(src_bytes) << ','
      << count(dst_bytes) << ',' << land << ',' << wrong_fragment << ',' << urgent << ',' << hot << ','
      << num_failed_logins << ',' << logged_in << ',' << num_compromised << ',' << root_shell << ',' << su_attempted
      << ',' << num_root << ',' << num_file_creations << ',' << num_shells << ',' << num_access_files << ",0,0,"
      << is_guest_login << ',' << count(cnt) << ',' << count(srv_count) << ',' << rate(serror) << ','
      << rate(srv_serror) << ',' << rate(rerror) << ',' << rate(srv_rerror) << ',' << rate(same_srv) << ','
      << rate(diff_srv) << ',' << rate(srv_diff_host) << ',' << count(dh_count) << ',' << count(dh_srv_count) << ','
      << rate(dh_same_srv) << ',' << rate(dh_diff_srv) << ',' << rate(dh_same_src_port) << ','
      << rate(dh_srv_diff_host) << ',' << rate(dh_serror) << ',' << rate(dh_srv_serror) << ',' << rate(dh_rerror)
      << ',' << rate(dh_srv_rerror) << ',' << label << ',' << difficulty << '\n';
    return s.str();
  }
};

double jitter(Rng& rng, double center, double spread) { return center + uniform(rng, -spread, spread); }

Row normal_row(Rng& rng) {
  Row r;
  constexpr std::array<std::string_view, 6> services = {"http", "http", "smtp", "ftp_data", "domain_u", "private"};
  r.service = pick(services, rng);
  r.protocol = r.service == "domain_u" || r.service == "private" ? "udp" : "tcp";
  r.logged_in = r.protocol == "tcp" ? 1 : 0;
  r.src_bytes = std::exp(uniform(rng, 3.5, 7.5));
  r.dst_bytes = r.protocol == "tcp" ? std::exp(uniform(rng, 5.0, 9.5)) : uniform(rng, 0, 200);
  r.duration = uniform01(rng) < 0.9 ? 0 : uniform(rng, 1, 3000);
  r.cnt = uniform(rng, 1, 20);
  r.srv_count = r.cnt + uniform(rng, 0, 20);
  r.same_srv = jitter(rng, 0.97, 0.03);
  r.diff_srv = uniform01(rng) < 0.8 ? 0 : uniform(rng, 0, 0.1);
  r.srv_diff_host = uniform01(rng) < 0.6 ? 0 : uniform(rng, 0, 0.3);
  r.dh_count = uniform(rng, 10, 255);
  r.dh_srv_count = uniform(rng, 50, 255);
  r.dh_same_srv = jitter(rng, 0.9, 0.1);
  r.dh_diff_srv = uniform(rng, 0, 0.05);
  r.dh_same_src_port = uniform(rng, 0, 0.1);
  r.dh_srv_diff_host = uniform(rng, 0, 0.05);
  r.hot = uniform01(rng) < 0.05 ? 1 : 0;
  return r;
}

Row dos_row(Rng& rng) {
  Row r;
  const double kind = uniform01(rng);
  if (kind < 0.75) {  // SYN flood
    constexpr std::array<std::string_view, 4> services = {"private", "http", "telnet", "other"};
    r.service = pick(services, rng);
    r.flag = uniform01(rng) < 0.85 ? "S0" : "REJ";
    r.cnt = uniform(rng, 100, 511);
    r.srv_count = uniform(rng, 1, 30);
    const bool syn = r.flag == "S0";
    r.serror = syn ? jitter(rng, 0.98, 0.02) : 0;
    r.srv_serror = r.serror;
    r.rerror = syn ? 0 : jitter(rng, 0.97, 0.03);
    r.srv_rerror = r.rerror;
    r.same_srv = uniform(rng, 0.0, 0.15);
    r.diff_srv = uniform(rng, 0.05, 0.1);
    r.dh_srv_count = uniform(rng, 1, 30);
    r.dh_same_srv = uniform(rng, 0.0, 0.12);
    r.dh_diff_srv = uniform(rng, 0.05, 0.1);
    r.dh_serror = r.serror;
    r.dh_srv_serror = r.srv_serror;
    r.dh_rerror = r.rerror;
    r.dh_srv_rerror = r.srv_rerror;
  } else if (kind < 0.9) {  // ICMP echo flood
    r.protocol = "icmp";
    r.service = "ecr_i";
    r.src_bytes = uniform01(rng) < 0.5 ? 1032 : 520;
    r.cnt = uniform(rng, 300, 511);
    r.srv_count = r.cnt;
    r.dh_srv_count = 255;
    r.dh_same_src_port = jitter(rng, 0.95, 0.05);
  } else {  // teardrop / back style
    r.service = "http";
    r.src_bytes = uniform(rng, 40000, 60000);
    r.dst_bytes = uniform(rng, 7000, 9000);
    r.logged_in = 1;
    r.hot = 2;
    r.num_compromised = 1;
    r.wrong_fragment = uniform01(rng) < 0.3 ? 3 : 0;
    r.cnt = uniform(rng, 1, 20);
    r.srv_count = r.cnt;
  }
  return r;
}

Row probe_row(Rng& rng) {
  Row r;
  constexpr std::array<std::string_view, 6> services = {"private", "other", "eco_i", "ftp", "telnet", "finger"};
  r.service = pick(services, rng);
  if (r.service == "eco_i") r.protocol = "icmp";
  r.flag = r.protocol == "icmp" ? "SF" : (uniform01(rng) < 0.6 ? "REJ" : "RSTR");
  r.src_bytes = uniform(rng, 0, 20);
  r.cnt = uniform(rng, 1, 10);
  r.srv_count = uniform(rng, 1, 5);
  r.rerror = r.flag == "SF" ? 0 : jitter(rng, 0.6, 0.4);
  r.srv_rerror = r.rerror;
  r.same_srv = uniform(rng, 0.1, 1.0);
  r.diff_srv = uniform(rng, 0.3, 1.0);
  r.srv_diff_host = uniform(rng, 0, 1);
  r.dh_count = uniform(rng, 1, 255);
  r.dh_srv_count = uniform(rng, 1, 10);
  r.dh_same_srv = uniform(rng, 0, 0.1);
  r.dh_diff_srv = uniform(rng, 0.4, 1.0);
  r.dh_same_src_port = uniform(rng, 0.5, 1.0);
  r.dh_srv_diff_host = uniform(rng, 0, 0.5);
  r.dh_rerror = r.rerror;
  r.dh_srv_rerror = jitter(rng, r.rerror, 0.1);
  return r;
}

Row r2l_row(Rng& rng) {
  Row r;
  constexpr std::array<std::string_view, 4> services = {"ftp_data", "ftp", "telnet", "imap4"};
  r.service = pick(services, rng);
  r.duration = uniform(rng, 0, 20000);
  r.src_bytes = std::exp(uniform(rng, 4.0, 13.0));
  r.dst_bytes = uniform(rng, 0, 5000);
  r.hot = static_cast<int>(bounded(rng, 30));
  r.num_failed_logins = uniform01(rng) < 0.3 ? 1 : 0;
  r.logged_in = r.num_failed_logins ? 0 : 1;
  r.is_guest_login = uniform01(rng) < 0.5 ? 1 : 0;
  r.num_access_files = uniform01(rng) < 0.2 ? 1 : 0;
  r.dh_count = uniform(rng, 1, 40);
  r.dh_srv_count = uniform(rng, 1, 40);
  r.dh_same_src_port = uniform(rng, 0.3, 1.0);
  r.dh_srv_diff_host = uniform(rng, 0.0, 0.3);
  return r;
}

Row u2r_row(Rng& rng) {
  Row r;
  constexpr std::array<std::string_view, 2> services = {"telnet", "ftp_data"};
  r.service = pick(services, rng);
  r.duration = uniform(rng, 20, 2000);
  r.src_bytes = uniform(rng, 1000, 5000);
  r.dst_bytes = uniform(rng, 1000, 20000);
  r.logged_in = 1;
  r.hot = static_cast<int>(1 + bounded(rng, 4));
  r.root_shell = 1;
  r.num_root = static_cast<int>(bounded(rng, 5));
  r.num_file_creations = static_cast<int>(1 + bounded(rng, 3));
  r.num_shells = uniform01(rng) < 0.5 ? 1 : 0;
  r.num_compromised = static_cast<int>(bounded(rng, 3));
  r.dh_count = uniform(rng, 1, 10);
  r.dh_srv_count = uniform(rng, 1, 10);
  return r;
}

}  // namespace

std::string synthetic_nslkdd(std::size_t rows, std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  // DoS, Probe, R2L, U2R shares; the rest is normal traffic.
  constexpr std::array<double, 4> share = {0.3646, 0.0925, 0.0079, 0.0004};
  std::vector<int> classes(rows, static_cast<int>(AttackClass::Normal));
  std::size_t next = 0;
  if (rows >= 10) {
    for (int c = 0; c < 4; ++c) {
      const auto n = std::max<std::size_t>(2, static_cast<std::size_t>(share[static_cast<std::size_t>(c)] * static_cast<double>(rows)));
      for (std::size_t k = 0; k < n && next < rows; ++k) classes[next++] = c;
    }
  }
  shuffle(std::span<int>(classes), rng);

  constexpr std::array<std::string_view, 4> probe_labels = {"satan", "ipsweep", "portsweep", "nmap"};
  constexpr std::array<std::string_view, 4> r2l_labels = {"warezclient", "guess_passwd", "ftp_write", "imap"};
  constexpr std::array<std::string_view, 3> u2r_labels = {"buffer_overflow", "rootkit", "loadmodule"};

  std::string out;
  for (const int c : classes) {
    const int difficulty = static_cast<int>(bounded(rng, 21)) + 1;
    switch (static_cast<AttackClass>(c)) {
      case AttackClass::DoS: {
        const Row r = dos_row(rng);
        const std::string_view label = r.protocol == "icmp" ? "smurf" : (r.src_bytes > 30000 ? "back" : "neptune");
        out += r.line(label, difficulty);
        break;
      }
      case AttackClass::Probe:
        out += probe_row(rng).line(pick(probe_labels, rng), difficulty);
        break;
      case AttackClass::R2L:
        out += r2l_row(rng).line(pick(r2l_labels, rng), difficulty);
        break;
      case AttackClass::U2R:
        out += u2r_row(rng).line(pick(u2r_labels, rng), difficulty);
        break;
      case AttackClass::Normal:
        out += normal_row(rng).line("normal", difficulty);
        break;
    }
  }
  return out;
}

void write_synthetic_nslkdd(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << synthetic_nslkdd(rows, seed);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace xids::data
