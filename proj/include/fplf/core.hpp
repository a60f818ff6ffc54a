#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fplf {

// Error categories map onto CLI exit codes.
enum class ErrorKind {
    data,             // malformed or inconsistent input
    schema,           // upstream payload lacks a required field
    network,          // retriable transport failure
    missing_artifact, // an upstream pipeline step has not been run
    config,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    bool retriable() const noexcept { return kind_ == ErrorKind::network; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& message) {
    throw Error(ErrorKind::data, message);
}

int exit_code(ErrorKind kind) noexcept;
std::string_view error_kind_name(ErrorKind kind) noexcept;

enum class Position : std::uint8_t { GK = 0, DEF = 1, MID = 2, FWD = 3, AM = 4 };

inline constexpr std::array<Position, 5> kAllPositions{
    Position::GK, Position::DEF, Position::MID, Position::FWD, Position::AM};

std::string_view to_string(Position position) noexcept;
Position parse_position(std::string_view text);

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS][Z]" and "YYYY-MM-DD HH:MM[:SS]".
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
// Days since the epoch of the UTC calendar day containing t.
std::int64_t day_number(Timestamp t) noexcept;

// "2023-24" -> 2023. Throws on malformed season labels.
int season_start_year(std::string_view season);
std::string season_label(int start_year);

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;
std::uint64_t fnv1a(std::span<const std::byte> bytes,
                    std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;
std::uint64_t fnv1a(std::string_view text) noexcept;

std::string sha256_hex(std::string_view bytes);

std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);
std::string to_lower(std::string_view text);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace fplf
