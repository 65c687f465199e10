#include "rvar/util.hpp"

#include <chrono>
#include <cstdio>

#include "rvar/error.hpp"

namespace rvar {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kCyclicPlan: return "CyclicPlan";
    case ErrorCode::kInvalidPlan: return "InvalidPlan";
    case ErrorCode::kNoHistory: return "NoHistory";
    case ErrorCode::kNoFuture: return "NoFuture";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kNonPositiveMedian: return "NonPositiveMedian";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kTooFewGroups: return "TooFewGroups";
    case ErrorCode::kSpecMismatch: return "SpecMismatch";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kEmptyTest: return "EmptyTest";
    case ErrorCode::kTooManyFeatures: return "TooManyFeatures";
    case ErrorCode::kUnknownFeature: return "UnknownFeature";
    case ErrorCode::kInvalidFraction: return "InvalidFraction";
    case ErrorCode::kEmptyJobSet: return "EmptyJobSet";
    case ErrorCode::kFingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Error";
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t from_hex(std::string_view s) {
  if (s.empty() || s.size() > 16) throw Error(ErrorCode::kInvalidArgument, "bad hex '" + std::string(s) + "'");
  std::uint64_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
    else throw Error(ErrorCode::kInvalidArgument, "bad hex '" + std::string(s) + "'");
  }
  return v;
}

namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace

Timestamp parse_rfc3339(std::string_view s) {
  using namespace std::chrono;
  auto fail = [&] { return Error(ErrorCode::kParse, "invalid RFC 3339 timestamp '" + std::string(s) + "'"); };
  int y, mo, d, h, mi, sec;
  if (!read_int(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || !read_int(s, 5, 2, mo) || s[7] != '-' ||
      !read_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || !read_int(s, 11, 2, h) ||
      s[13] != ':' || !read_int(s, 14, 2, mi) || s[16] != ':' || !read_int(s, 17, 2, sec)) {
    throw fail();
  }
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) throw fail();

  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) throw fail();
  }
  long offset = 0;
  if (pos == s.size()) throw fail();
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh, om;
    if (!read_int(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' || !read_int(s, pos + 4, 2, om)) {
      throw fail();
    }
    offset = (s[pos] == '-' ? -1L : 1L) * (oh * 3600L + om * 60L);
    pos += 6;
  } else {
    throw fail();
  }
  if (pos != s.size()) throw fail();

  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + sec - offset;
}

std::string format_rfc3339(Timestamp t) {
  using namespace std::chrono;
  Timestamp days = t / 86400;
  Timestamp rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 3600),
                static_cast<int>((rem / 60) % 60), static_cast<int>(rem % 60));
  return buf;
}

}  // namespace rvar
