#include "fplf/core.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace fplf {

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::schema: return 4;
        case ErrorKind::network: return 5;
        case ErrorKind::missing_artifact: return 6;
        case ErrorKind::internal: return 1;
    }
    return 1;
}

std::string_view error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config: return "config";
        case ErrorKind::data: return "data";
        case ErrorKind::schema: return "schema";
        case ErrorKind::network: return "network";
        case ErrorKind::missing_artifact: return "missing-artifact";
        case ErrorKind::internal: return "internal";
    }
    return "internal";
}

std::string_view to_string(Position position) noexcept {
    switch (position) {
        case Position::GK: return "GK";
        case Position::DEF: return "DEF";
        case Position::MID: return "MID";
        case Position::FWD: return "FWD";
        case Position::AM: return "AM";
    }
    return "?";
}

Position parse_position(std::string_view text) {
    const std::string t = trim(text);
    if (t == "GK" || t == "GKP" || t == "1") return Position::GK;
    if (t == "DEF" || t == "2") return Position::DEF;
    if (t == "MID" || t == "3") return Position::MID;
    if (t == "FWD" || t == "4") return Position::FWD;
    if (t == "AM" || t == "5") return Position::AM;
    fail("unknown position code: '" + t + "'");
}

namespace {

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) noexcept {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) noexcept {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp < 10 ? mp + 3 : mp - 9;
    y = static_cast<int>(static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2));
}

int parse_fixed(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    int value = 0;
    if (pos + len > text.size()) fail("malformed timestamp: '" + std::string(whole) + "'");
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len)
        fail("malformed timestamp: '" + std::string(whole) + "'");
    return value;
}

}  // namespace

Timestamp parse_timestamp(std::string_view raw) {
    const std::string s = trim(raw);
    const std::string_view text = s;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-')
        fail("malformed timestamp: '" + s + "'");
    const int y = parse_fixed(text, 0, 4, text);
    const int mo = parse_fixed(text, 5, 2, text);
    const int d = parse_fixed(text, 8, 2, text);
    if (mo < 1 || mo > 12 || d < 1 || d > 31) fail("malformed timestamp: '" + s + "'");
    int hh = 0, mm = 0, ss = 0;
    if (text.size() > 10) {
        if (text[10] != 'T' && text[10] != ' ') fail("malformed timestamp: '" + s + "'");
        hh = parse_fixed(text, 11, 2, text);
        if (text.size() < 16 || text[13] != ':') fail("malformed timestamp: '" + s + "'");
        mm = parse_fixed(text, 14, 2, text);
        std::size_t rest = 16;
        if (text.size() >= 19 && text[16] == ':') {
            ss = parse_fixed(text, 17, 2, text);
            rest = 19;
        }
        // Fractional seconds and a trailing Z are accepted and ignored.
        while (rest < text.size() && (text[rest] == '.' || std::isdigit(static_cast<unsigned char>(text[rest]))))
            ++rest;
        if (rest < text.size() && text[rest] == 'Z') ++rest;
        if (rest != text.size()) fail("malformed timestamp: '" + s + "'");
    }
    return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
           hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(Timestamp t) {
    const std::int64_t days = day_number(t);
    const std::int64_t secs = t - days * 86400;
    int y = 0;
    unsigned m = 0, d = 0;
    civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", y, m, d,
                  static_cast<int>(secs / 3600), static_cast<int>((secs / 60) % 60),
                  static_cast<int>(secs % 60));
    return buf;
}

std::int64_t day_number(Timestamp t) noexcept {
    return t >= 0 ? t / 86400 : -((-t + 86399) / 86400);
}

int season_start_year(std::string_view season) {
    const std::string s = trim(season);
    int start = 0, end = 0;
    if (s.size() != 7 || s[4] != '-') fail("malformed season label: '" + s + "'");
    auto r1 = std::from_chars(s.data(), s.data() + 4, start);
    auto r2 = std::from_chars(s.data() + 5, s.data() + 7, end);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || (start + 1) % 100 != end)
        fail("malformed season label: '" + s + "'");
    return start;
}

std::string season_label(int start_year) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d", start_year, (start_year + 1) % 100);
    return buf;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
    return splitmix64(splitmix64(seed) ^ (salt * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t basis) noexcept {
    std::uint64_t h = basis;
    for (std::byte b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a(std::string_view text) noexcept {
    return fnv1a(std::as_bytes(std::span(text.data(), text.size())));
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::internal, "sha256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    return out;
}

std::string trim(std::string_view text) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.emplace_back(text.substr(start));
            break;
        }
        parts.emplace_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    return parts;
}

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw Error(ErrorKind::internal, "double formatting failed");
    return std::string(buf, ptr);
}

}  // namespace fplf
