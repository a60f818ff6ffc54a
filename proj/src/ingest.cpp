#include "fplf/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "fplf/csv.hpp"

namespace fplf::ingest {

namespace fs = std::filesystem;
using nlohmann::json;

int map_availability(std::string_view status_code, std::optional<int> chance_pct) {
    if (chance_pct) {
        const int c = *chance_pct;
        if (c != 0 && c != 25 && c != 50 && c != 75 && c != 100)
            fail("availability chance " + std::to_string(c) + "% is not one of 0/25/50/75/100");
    }
    const std::string s = to_lower(trim(status_code));
    if (s == "a") return chance_pct.value_or(100);
    if (s == "d") {
        if (!chance_pct) fail("status 'd' requires a chance-of-playing value");
        return *chance_pct;
    }
    if (s == "i" || s == "s" || s == "u" || s == "n") return chance_pct.value_or(0);
    fail("unknown FPL status code: '" + std::string(status_code) + "'");
}

void validate(const RawFplPlayerGW& r) {
    const std::string who = "player " + r.player_id + " gw " + std::to_string(r.gameweek);
    if (r.minutes < 0 || r.minutes > 120) fail(who + ": minutes out of [0,120]");
    if (r.gameweek < 1 || r.gameweek > kMaxGameweek) fail(who + ": gameweek out of season bounds");
    const int a = r.availability_pct;
    if (a != 0 && a != 25 && a != 50 && a != 75 && a != 100) fail(who + ": invalid availability");
    for (int v : {r.goals_scored, r.assists, r.goals_conceded, r.own_goals, r.saves,
                  r.penalties_saved, r.penalties_missed, r.yellow_cards, r.red_cards, r.bonus})
        if (v < 0) fail(who + ": negative event count");
    if (r.influence < 0 || r.creativity < 0 || r.threat < 0) fail(who + ": negative ICT value");
    if (r.team == r.opponent_team) fail(who + ": team equals opponent");
}

void validate(const RawUnderstatPlayerMatch& r) {
    if (r.shots < 0 || r.key_passes < 0 || r.xg < 0 || r.xa < 0 || r.xg_chain < 0 || r.xg_buildup < 0)
        fail("understat player " + r.player_key + ": negative value");
}

void validate(const RawUnderstatTeamMatch& r) {
    if (r.xg < 0 || r.xga < 0 || r.deep < 0 || r.deep_allowed < 0 || r.ppda_att < 0 ||
        r.ppda_def < 0 || r.ppda_allowed_att < 0 || r.ppda_allowed_def < 0 || r.goals_scored < 0 ||
        r.goals_conceded < 0)
        fail("understat team " + r.team_key + ": negative value");
}

void validate(const Fixture& f) {
    if (f.home_team == f.away_team) fail("fixture with identical home and away team: " + f.home_team);
    if (f.gameweek < 1 || f.gameweek > kMaxGameweek) fail("fixture gameweek out of season bounds");
}

const std::vector<std::string>& canonical_fpl_columns() {
    static const std::vector<std::string> cols{
        "season", "gameweek", "player_id", "name", "position", "team", "opponent_team",
        "was_home", "minutes", "total_points", "goals_scored", "assists", "goals_conceded",
        "own_goals", "saves", "penalties_saved", "penalties_missed", "yellow_cards",
        "red_cards", "bonus", "bps", "influence", "creativity", "threat", "availability"};
    return cols;
}

namespace {

const std::vector<std::string> kFixtureColumns{"season", "gameweek", "home_team", "away_team",
                                               "kickoff", "deadline"};
const std::vector<std::string> kUsPlayerColumns{"player_key", "match_date", "shots", "xg", "xa",
                                                "xg_chain", "xg_buildup", "key_passes"};
const std::vector<std::string> kUsTeamColumns{
    "team_key", "match_date", "xg", "xga", "deep", "deep_allowed", "ppda_att", "ppda_def",
    "ppda_allowed_att", "ppda_allowed_def", "goals_scored", "goals_conceded"};

int as_int(const csv::Table& t, std::size_t r, std::string_view c) {
    return static_cast<int>(t.get_int(r, c));
}

std::string db(double v) { return format_double(v); }

std::optional<int> gameweek_from_filename(const std::string& name) {
    // gws/gw12.csv
    if (name.rfind("gws/gw", 0) != 0 || name.size() < 11 || name.substr(name.size() - 4) != ".csv")
        return std::nullopt;
    const std::string digits = name.substr(6, name.size() - 10);
    int gw = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), gw);
    if (ec != std::errc{} || p != digits.data() + digits.size()) return std::nullopt;
    return gw;
}

SeasonData season_from_canonical(const Payloads& payloads, const std::string& season,
                                 const std::string& origin) {
    SeasonData data;
    data.season = season;
    std::vector<std::pair<int, std::string>> gw_files;
    for (const auto& [name, _] : payloads)
        if (auto gw = gameweek_from_filename(name)) gw_files.emplace_back(*gw, name);
    std::sort(gw_files.begin(), gw_files.end());

    for (const auto& [gw, name] : gw_files) {
        const auto t = csv::Table::parse(payloads.at(name), origin + "/" + name);
        t.require_columns(canonical_fpl_columns());
        for (std::size_t r = 0; r < t.size(); ++r) {
            RawFplPlayerGW rec;
            rec.season = trim(t.cell(r, "season"));
            if (rec.season != season)
                fail(t.source() + ": row " + std::to_string(r + 1) + " has season '" + rec.season +
                     "', expected '" + season + "'");
            rec.gameweek = as_int(t, r, "gameweek");
            rec.player_id = trim(t.cell(r, "player_id"));
            rec.player_name = t.cell(r, "name");
            try {
                rec.position = parse_position(t.cell(r, "position"));
            } catch (const Error& e) {
                fail(t.source() + ": row " + std::to_string(r + 1) + ", column 'position': " + e.what());
            }
            rec.team = trim(t.cell(r, "team"));
            rec.opponent_team = trim(t.cell(r, "opponent_team"));
            rec.was_home = t.get_bool(r, "was_home");
            rec.minutes = as_int(t, r, "minutes");
            rec.total_points = as_int(t, r, "total_points");
            rec.goals_scored = as_int(t, r, "goals_scored");
            rec.assists = as_int(t, r, "assists");
            rec.goals_conceded = as_int(t, r, "goals_conceded");
            rec.own_goals = as_int(t, r, "own_goals");
            rec.saves = as_int(t, r, "saves");
            rec.penalties_saved = as_int(t, r, "penalties_saved");
            rec.penalties_missed = as_int(t, r, "penalties_missed");
            rec.yellow_cards = as_int(t, r, "yellow_cards");
            rec.red_cards = as_int(t, r, "red_cards");
            rec.bonus = as_int(t, r, "bonus");
            rec.bps = as_int(t, r, "bps");
            rec.influence = t.get_double(r, "influence");
            rec.creativity = t.get_double(r, "creativity");
            rec.threat = t.get_double(r, "threat");
            rec.availability_pct = as_int(t, r, "availability");
            try {
                validate(rec);
            } catch (const Error& e) {
                fail(t.source() + ": row " + std::to_string(r + 1) + ": " + e.what());
            }
            data.fpl.push_back(std::move(rec));
        }
    }

    if (auto it = payloads.find("fixtures.csv"); it != payloads.end()) {
        const auto t = csv::Table::parse(it->second, origin + "/fixtures.csv");
        t.require_columns(kFixtureColumns);
        for (std::size_t r = 0; r < t.size(); ++r) {
            Fixture f;
            f.season = trim(t.cell(r, "season"));
            f.gameweek = as_int(t, r, "gameweek");
            f.home_team = trim(t.cell(r, "home_team"));
            f.away_team = trim(t.cell(r, "away_team"));
            f.kickoff = parse_timestamp(t.cell(r, "kickoff"));
            f.deadline = parse_timestamp(t.cell(r, "deadline"));
            validate(f);
            data.fixtures.push_back(std::move(f));
        }
    }
    if (auto it = payloads.find("understat_players.csv"); it != payloads.end()) {
        const auto t = csv::Table::parse(it->second, origin + "/understat_players.csv");
        t.require_columns(kUsPlayerColumns);
        for (std::size_t r = 0; r < t.size(); ++r) {
            RawUnderstatPlayerMatch m;
            m.player_key = trim(t.cell(r, "player_key"));
            m.match_date = parse_timestamp(t.cell(r, "match_date"));
            m.shots = as_int(t, r, "shots");
            m.xg = t.get_double(r, "xg");
            m.xa = t.get_double(r, "xa");
            m.xg_chain = t.get_double(r, "xg_chain");
            m.xg_buildup = t.get_double(r, "xg_buildup");
            m.key_passes = as_int(t, r, "key_passes");
            validate(m);
            data.understat_players.push_back(std::move(m));
        }
    }
    if (auto it = payloads.find("understat_teams.csv"); it != payloads.end()) {
        const auto t = csv::Table::parse(it->second, origin + "/understat_teams.csv");
        t.require_columns(kUsTeamColumns);
        for (std::size_t r = 0; r < t.size(); ++r) {
            RawUnderstatTeamMatch m;
            m.team_key = trim(t.cell(r, "team_key"));
            m.match_date = parse_timestamp(t.cell(r, "match_date"));
            m.xg = t.get_double(r, "xg");
            m.xga = t.get_double(r, "xga");
            m.deep = as_int(t, r, "deep");
            m.deep_allowed = as_int(t, r, "deep_allowed");
            m.ppda_att = t.get_double(r, "ppda_att");
            m.ppda_def = t.get_double(r, "ppda_def");
            m.ppda_allowed_att = t.get_double(r, "ppda_allowed_att");
            m.ppda_allowed_def = t.get_double(r, "ppda_allowed_def");
            m.goals_scored = as_int(t, r, "goals_scored");
            m.goals_conceded = as_int(t, r, "goals_conceded");
            validate(m);
            data.understat_teams.push_back(std::move(m));
        }
    }
    return data;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail("cannot open " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& p, std::string_view bytes) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail("short write to " + p.string());
}

Payloads read_tree(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail("not a directory: " + dir.string());
    Payloads out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        out.emplace(fs::relative(entry.path(), dir).generic_string(), read_file(entry.path()));
    }
    return out;
}

Payloads canonical_payloads(const SeasonData& data) {
    Payloads out;
    std::map<int, csv::Table> by_gw;
    for (const auto& r : data.fpl) {
        auto [it, _] = by_gw.try_emplace(r.gameweek, csv::Table(canonical_fpl_columns()));
        it->second.add_row({r.season, std::to_string(r.gameweek), r.player_id, r.player_name,
                            std::string(to_string(r.position)), r.team, r.opponent_team,
                            r.was_home ? "true" : "false", std::to_string(r.minutes),
                            std::to_string(r.total_points), std::to_string(r.goals_scored),
                            std::to_string(r.assists), std::to_string(r.goals_conceded),
                            std::to_string(r.own_goals), std::to_string(r.saves),
                            std::to_string(r.penalties_saved), std::to_string(r.penalties_missed),
                            std::to_string(r.yellow_cards), std::to_string(r.red_cards),
                            std::to_string(r.bonus), std::to_string(r.bps), db(r.influence),
                            db(r.creativity), db(r.threat), std::to_string(r.availability_pct)});
    }
    for (const auto& [gw, table] : by_gw) out["gws/gw" + std::to_string(gw) + ".csv"] = table.to_string();

    csv::Table fixtures(kFixtureColumns);
    for (const auto& f : data.fixtures)
        fixtures.add_row({f.season, std::to_string(f.gameweek), f.home_team, f.away_team,
                          format_timestamp(f.kickoff), format_timestamp(f.deadline)});
    out["fixtures.csv"] = fixtures.to_string();

    csv::Table players(kUsPlayerColumns);
    for (const auto& m : data.understat_players)
        players.add_row({m.player_key, format_timestamp(m.match_date), std::to_string(m.shots),
                         db(m.xg), db(m.xa), db(m.xg_chain), db(m.xg_buildup),
                         std::to_string(m.key_passes)});
    out["understat_players.csv"] = players.to_string();

    csv::Table teams(kUsTeamColumns);
    for (const auto& m : data.understat_teams)
        teams.add_row({m.team_key, format_timestamp(m.match_date), db(m.xg), db(m.xga),
                       std::to_string(m.deep), std::to_string(m.deep_allowed), db(m.ppda_att),
                       db(m.ppda_def), db(m.ppda_allowed_att), db(m.ppda_allowed_def),
                       std::to_string(m.goals_scored), std::to_string(m.goals_conceded)});
    out["understat_teams.csv"] = teams.to_string();
    return out;
}

}  // namespace

SeasonData load_historical_season(const fs::path& dir, const std::string& season) {
    return season_from_canonical(read_tree(dir), season, dir.string());
}

void write_historical_season(const fs::path& dir, const SeasonData& data) {
    for (const auto& [name, bytes] : canonical_payloads(data)) write_file(dir / name, bytes);
}

// ---------------------------------------------------------------------------

std::string_view to_string(DataSource source) noexcept {
    switch (source) {
        case DataSource::fpl_api: return "fpl_api";
        case DataSource::understat_api: return "understat_api";
        case DataSource::historical_csv: return "historical_csv";
    }
    return "?";
}

DataSource parse_data_source(std::string_view text) {
    if (text == "fpl_api") return DataSource::fpl_api;
    if (text == "understat_api") return DataSource::understat_api;
    if (text == "historical_csv") return DataSource::historical_csv;
    throw Error(ErrorKind::config, "unknown data source: '" + std::string(text) + "'");
}

json SnapshotManifest::to_json() const {
    json j;
    j["source"] = std::string(fplf::ingest::to_string(source));
    j["season"] = season;
    j["gameweek"] = gameweek ? json(*gameweek) : json(nullptr);
    j["fetched_at"] = format_timestamp(fetched_at);
    j["snapshot_id"] = snapshot_id;
    j["content_checksum"] = content_checksum;
    j["file_list"] = file_list;
    return j;
}

SnapshotManifest SnapshotManifest::from_json(const json& j) {
    SnapshotManifest m;
    m.source = parse_data_source(j.at("source").get<std::string>());
    m.season = j.at("season").get<std::string>();
    if (!j.at("gameweek").is_null()) m.gameweek = j.at("gameweek").get<int>();
    m.fetched_at = parse_timestamp(j.at("fetched_at").get<std::string>());
    m.snapshot_id = j.at("snapshot_id").get<std::string>();
    m.content_checksum = j.at("content_checksum").get<std::string>();
    m.file_list = j.at("file_list").get<std::vector<std::string>>();
    return m;
}

std::string payload_checksum(const Payloads& payloads) {
    std::string buffer;
    for (const auto& [name, bytes] : payloads) {
        buffer += name;
        buffer.push_back('\0');
        buffer += std::to_string(bytes.size());
        buffer.push_back('\0');
        buffer += bytes;
    }
    return sha256_hex(buffer);
}

SnapshotStore::SnapshotStore(fs::path root) : root_(std::move(root)) {}

fs::path SnapshotStore::slot_dir(DataSource source, const std::string& season,
                                 std::optional<int> gameweek) const {
    return root_ / std::string(to_string(source)) / season /
           (gameweek ? "gw" + std::to_string(*gameweek) : std::string("season"));
}

namespace {

std::vector<SnapshotManifest> read_manifest_list(const fs::path& file) {
    std::vector<SnapshotManifest> out;
    if (!fs::exists(file)) return out;
    const json j = json::parse(read_file(file));
    for (const auto& e : j) out.push_back(SnapshotManifest::from_json(e));
    return out;
}

}  // namespace

SnapshotManifest SnapshotStore::write(DataSource source, const std::string& season,
                                      std::optional<int> gameweek, const Payloads& payloads,
                                      Timestamp fetched_at) {
    std::lock_guard lock(mutex_);
    const fs::path slot = slot_dir(source, season, gameweek);
    const fs::path manifest_file = slot / "manifest.json";
    auto existing = read_manifest_list(manifest_file);

    SnapshotManifest m;
    m.source = source;
    m.season = season;
    m.gameweek = gameweek;
    m.fetched_at = fetched_at;
    char id[16];
    std::snprintf(id, sizeof id, "%06zu", existing.size() + 1);
    m.snapshot_id = id;
    m.content_checksum = payload_checksum(payloads);
    for (const auto& [name, _] : payloads) m.file_list.push_back(name);

    const fs::path dir = slot / m.snapshot_id;
    if (fs::exists(dir)) throw Error(ErrorKind::internal, "snapshot directory already exists: " + dir.string());
    for (const auto& [name, bytes] : payloads) {
        if (name.empty() || name.find("..") != std::string::npos || name.front() == '/')
            fail("invalid payload path: '" + name + "'");
        write_file(dir / name, bytes);
    }

    existing.push_back(m);
    json list = json::array();
    for (const auto& e : existing) list.push_back(e.to_json());
    const fs::path tmp = slot / "manifest.json.tmp";
    write_file(tmp, list.dump(2) + "\n");
    fs::rename(tmp, manifest_file);
    return m;
}

std::vector<SnapshotManifest> SnapshotStore::list(DataSource source, const std::string& season,
                                                  std::optional<int> gameweek) const {
    std::lock_guard lock(mutex_);
    return read_manifest_list(slot_dir(source, season, gameweek) / "manifest.json");
}

std::vector<SnapshotManifest> SnapshotStore::list_all(DataSource source, const std::string& season) const {
    std::lock_guard lock(mutex_);
    std::vector<SnapshotManifest> out;
    const fs::path base = root_ / std::string(to_string(source)) / season;
    if (!fs::is_directory(base)) return out;
    std::vector<fs::path> slots;
    for (const auto& entry : fs::directory_iterator(base))
        if (entry.is_directory()) slots.push_back(entry.path());
    std::sort(slots.begin(), slots.end());
    for (const auto& s : slots) {
        auto part = read_manifest_list(s / "manifest.json");
        out.insert(out.end(), part.begin(), part.end());
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return std::tie(a.fetched_at, a.gameweek, a.snapshot_id) <
               std::tie(b.fetched_at, b.gameweek, b.snapshot_id);
    });
    return out;
}

std::optional<SnapshotManifest> SnapshotStore::latest(DataSource source, const std::string& season) const {
    auto all = list_all(source, season);
    if (all.empty()) return std::nullopt;
    return all.back();
}

fs::path SnapshotStore::directory(const SnapshotManifest& m) const {
    return slot_dir(m.source, m.season, m.gameweek) / m.snapshot_id;
}

Payloads SnapshotStore::read(const SnapshotManifest& m) const {
    Payloads out;
    const fs::path dir = directory(m);
    for (const auto& name : m.file_list) out.emplace(name, read_file(dir / name));
    if (payload_checksum(out) != m.content_checksum)
        fail("snapshot " + dir.string() + " does not match its manifest checksum");
    return out;
}

void SnapshotStore::verify(const SnapshotManifest& m) const { (void)read(m); }

// ---------------------------------------------------------------------------
// Payload parsing

namespace {

[[noreturn]] void missing_field(std::string_view name) {
    throw Error(ErrorKind::schema, "missing field: " + std::string(name));
}

const json& field(const json& obj, std::string_view name) {
    if (!obj.is_object()) throw Error(ErrorKind::schema, "expected JSON object holding field: " + std::string(name));
    auto it = obj.find(name);
    if (it == obj.end()) missing_field(name);
    return *it;
}

// Upstream APIs encode many numbers as strings.
double num(const json& v, std::string_view name) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = trim(v.get<std::string>());
        double d = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
        if (ec == std::errc{} && p == s.data() + s.size() && !s.empty()) return d;
    }
    if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
    throw Error(ErrorKind::schema, "field " + std::string(name) + " is not numeric");
}

double num_field(const json& obj, std::string_view name) { return num(field(obj, name), name); }
int int_field(const json& obj, std::string_view name) {
    return static_cast<int>(std::llround(num_field(obj, name)));
}
std::string id_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return format_double(v.get<double>());
    throw Error(ErrorKind::schema, "identifier is neither string nor number");
}

const std::vector<std::string> kHistoryFields{
    "fixture", "opponent_team", "total_points", "was_home", "kickoff_time", "round", "minutes",
    "goals_scored", "assists", "goals_conceded", "own_goals", "penalties_saved",
    "penalties_missed", "yellow_cards", "red_cards", "saves", "bonus", "bps", "influence",
    "creativity", "threat"};

std::string decode_js_string(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '\\' || i + 1 >= s.size()) {
            out.push_back(s[i]);
            continue;
        }
        const char n = s[++i];
        if (n == 'x' && i + 2 < s.size()) {
            int v = 0;
            auto [p, ec] = std::from_chars(s.data() + i + 1, s.data() + i + 3, v, 16);
            if (ec != std::errc{} || p != s.data() + i + 3)
                throw Error(ErrorKind::schema, "bad \\x escape in embedded Understat JSON");
            out.push_back(static_cast<char>(v));
            i += 2;
        } else if (n == 'n') {
            out.push_back('\n');
        } else {
            out.push_back(n);  // \' \\ \" and friends
        }
    }
    return out;
}

}  // namespace

void check_fpl_bootstrap(const json& bootstrap) {
    for (const char* k : {"events", "teams", "elements"}) (void)field(bootstrap, k);
    for (const auto& t : field(bootstrap, "teams"))
        for (const char* k : {"id", "name"}) (void)field(t, k);
    for (const auto& e : field(bootstrap, "events"))
        for (const char* k : {"id", "deadline_time"}) (void)field(e, k);
    for (const auto& e : field(bootstrap, "elements"))
        for (const char* k : {"id", "web_name", "element_type", "team", "status",
                              "chance_of_playing_next_round"})
            (void)field(e, k);
}

void check_fpl_history(const json& summary) {
    for (const auto& h : field(summary, "history"))
        for (const auto& k : kHistoryFields) (void)field(h, k);
}

json extract_understat_json(std::string_view payload, std::string_view key) {
    const std::string text = trim(payload);
    if (!text.empty() && (text.front() == '{' || text.front() == '[')) {
        json j = json::parse(text);
        if (j.is_object() && j.contains(key)) return j.at(std::string(key));
        return j;
    }
    const std::string var = "var " + std::string(key) + "Data";
    const std::size_t at = text.find(var);
    if (at == std::string::npos)
        throw Error(ErrorKind::schema, "missing field: " + std::string(key) + "Data");
    const std::size_t open = text.find("JSON.parse('", at);
    if (open == std::string::npos)
        throw Error(ErrorKind::schema, "embedded " + var + " has no JSON.parse payload");
    const std::size_t start = open + 12;
    std::size_t end = start;
    while (end < text.size() && !(text[end] == '\'' && text[end - 1] != '\\')) ++end;
    if (end >= text.size()) throw Error(ErrorKind::schema, "unterminated JSON.parse payload for " + var);
    return json::parse(decode_js_string(std::string_view(text).substr(start, end - start)));
}

SeasonData season_from_fpl_snapshot(const Payloads& payloads, const std::string& season) {
    SeasonData data;
    data.season = season;
    const auto find = [&](const std::string& name) -> const std::string& {
        auto it = payloads.find(name);
        if (it == payloads.end()) fail("fpl snapshot lacks " + name);
        return it->second;
    };
    const json boot = json::parse(find("bootstrap-static.json"));
    check_fpl_bootstrap(boot);
    std::map<std::string, std::string> team_names;
    for (const auto& t : boot.at("teams")) team_names[id_text(t.at("id"))] = t.at("name").get<std::string>();
    std::map<int, Timestamp> deadlines;
    for (const auto& e : boot.at("events"))
        deadlines[e.at("id").get<int>()] = parse_timestamp(e.at("deadline_time").get<std::string>());
    const auto team_name = [&](const json& id) {
        auto it = team_names.find(id_text(id));
        if (it == team_names.end()) fail("fpl snapshot references unknown team id " + id_text(id));
        return it->second;
    };

    const json fixtures = json::parse(find("fixtures.json"));
    for (const auto& f : fixtures) {
        if (!f.contains("event") || f.at("event").is_null()) continue;
        Fixture fx;
        fx.season = season;
        fx.gameweek = f.at("event").get<int>();
        fx.home_team = team_name(field(f, "team_h"));
        fx.away_team = team_name(field(f, "team_a"));
        fx.kickoff = parse_timestamp(field(f, "kickoff_time").get<std::string>());
        auto dl = deadlines.find(fx.gameweek);
        fx.deadline = dl != deadlines.end() ? dl->second : fx.kickoff;
        validate(fx);
        data.fixtures.push_back(std::move(fx));
    }

    for (const auto& el : boot.at("elements")) {
        const std::string id = id_text(el.at("id"));
        auto it = payloads.find("element-summary/" + id + ".json");
        if (it == payloads.end()) continue;
        const json summary = json::parse(it->second);
        check_fpl_history(summary);
        const json& chance = el.at("chance_of_playing_next_round");
        const int availability = map_availability(
            el.at("status").get<std::string>(),
            chance.is_null() ? std::nullopt : std::optional<int>(static_cast<int>(num(chance, "chance"))));
        for (const auto& h : summary.at("history")) {
            RawFplPlayerGW r;
            r.season = season;
            r.player_id = id;
            r.player_name = el.at("web_name").get<std::string>();
            r.position = parse_position(id_text(el.at("element_type")));
            r.team = team_name(el.at("team"));
            r.opponent_team = team_name(h.at("opponent_team"));
            r.was_home = h.at("was_home").get<bool>();
            r.gameweek = int_field(h, "round");
            r.minutes = int_field(h, "minutes");
            r.total_points = int_field(h, "total_points");
            r.goals_scored = int_field(h, "goals_scored");
            r.assists = int_field(h, "assists");
            r.goals_conceded = int_field(h, "goals_conceded");
            r.own_goals = int_field(h, "own_goals");
            r.saves = int_field(h, "saves");
            r.penalties_saved = int_field(h, "penalties_saved");
            r.penalties_missed = int_field(h, "penalties_missed");
            r.yellow_cards = int_field(h, "yellow_cards");
            r.red_cards = int_field(h, "red_cards");
            r.bonus = int_field(h, "bonus");
            r.bps = int_field(h, "bps");
            r.influence = num_field(h, "influence");
            r.creativity = num_field(h, "creativity");
            r.threat = num_field(h, "threat");
            // Past availability is not published; the current tag is recorded.
            r.availability_pct = availability;
            validate(r);
            data.fpl.push_back(std::move(r));
        }
    }
    return data;
}

void add_understat_snapshot(SeasonData& data, const Payloads& payloads) {
    auto league = payloads.find("league.payload");
    if (league == payloads.end()) fail("understat snapshot lacks league.payload");
    const json teams = extract_understat_json(league->second, "teams");
    for (const auto& [_, team] : teams.items()) {
        const std::string title = field(team, "title").get<std::string>();
        for (const auto& h : field(team, "history")) {
            RawUnderstatTeamMatch m;
            m.team_key = title;
            m.match_date = parse_timestamp(field(h, "date").get<std::string>());
            m.xg = num_field(h, "xG");
            m.xga = num_field(h, "xGA");
            m.deep = int_field(h, "deep");
            m.deep_allowed = int_field(h, "deep_allowed");
            m.ppda_att = num_field(field(h, "ppda"), "att");
            m.ppda_def = num_field(field(h, "ppda"), "def");
            m.ppda_allowed_att = num_field(field(h, "ppda_allowed"), "att");
            m.ppda_allowed_def = num_field(field(h, "ppda_allowed"), "def");
            m.goals_scored = int_field(h, "scored");
            m.goals_conceded = int_field(h, "missed");
            validate(m);
            data.understat_teams.push_back(std::move(m));
        }
    }
    for (const auto& [name, bytes] : payloads) {
        if (name.rfind("players/", 0) != 0) continue;
        const std::string key = name.substr(8, name.size() - 8 - std::string(".payload").size());
        const json matches = extract_understat_json(bytes, "matches");
        for (const auto& h : matches) {
            RawUnderstatPlayerMatch m;
            m.player_key = key;
            m.match_date = parse_timestamp(field(h, "date").get<std::string>());
            m.shots = int_field(h, "shots");
            m.xg = num_field(h, "xG");
            m.xa = num_field(h, "xA");
            m.xg_chain = num_field(h, "xGChain");
            m.xg_buildup = num_field(h, "xGBuildup");
            m.key_passes = int_field(h, "key_passes");
            validate(m);
            data.understat_players.push_back(std::move(m));
        }
    }
}

namespace {

std::string replace_all(std::string s, std::string_view from, const std::string& to) {
    for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size()))
        s.replace(p, from.size(), to);
    return s;
}

std::string get_with_retry(HttpClient& client, const std::string& url, int attempts) {
    std::string last;
    for (int i = 0; i < std::max(1, attempts); ++i) {
        try {
            return client.get(url);
        } catch (const Error& e) {
            if (!e.retriable()) throw;
            last = e.what();
        }
    }
    throw Error(ErrorKind::network, "GET " + url + " failed after " + std::to_string(attempts) +
                                        " attempt(s): " + last);
}

}  // namespace

SnapshotManifest fetch_live_snapshot(SnapshotStore& store, HttpClient& client, DataSource source,
                                     const std::string& season, int gameweek, Timestamp fetched_at,
                                     const Endpoints& endpoints) {
    if (gameweek < 1 || gameweek > kMaxGameweek) throw Error(ErrorKind::config, "gameweek out of range");
    const int year = season_start_year(season);
    Payloads payloads;
    if (source == DataSource::fpl_api) {
        const std::string base = endpoints.fpl_base;
        payloads["bootstrap-static.json"] = get_with_retry(client, base + "/bootstrap-static/", endpoints.attempts);
        const json boot = json::parse(payloads["bootstrap-static.json"]);
        check_fpl_bootstrap(boot);
        payloads["fixtures.json"] = get_with_retry(client, base + "/fixtures/", endpoints.attempts);
        for (const auto& el : boot.at("elements")) {
            const std::string id = id_text(el.at("id"));
            std::string body = get_with_retry(client, base + "/element-summary/" + id + "/", endpoints.attempts);
            check_fpl_history(json::parse(body));
            payloads["element-summary/" + id + ".json"] = std::move(body);
        }
    } else if (source == DataSource::understat_api) {
        const std::string league_url = replace_all(endpoints.understat_league, "{year}", std::to_string(year));
        payloads["league.payload"] = get_with_retry(client, league_url, endpoints.attempts);
        (void)extract_understat_json(payloads["league.payload"], "teams");
        const json players = extract_understat_json(payloads["league.payload"], "players");
        for (const auto& p : players) {
            const std::string id = id_text(field(p, "id"));
            const std::string url = replace_all(endpoints.understat_player, "{id}", id);
            std::string body = get_with_retry(client, url, endpoints.attempts);
            (void)extract_understat_json(body, "matches");
            payloads["players/" + id + ".payload"] = std::move(body);
        }
    } else {
        throw Error(ErrorKind::config, "historical_csv is imported from disk, not fetched");
    }
    return store.write(source, season, gameweek, payloads, fetched_at);
}

SnapshotManifest import_historical_season(SnapshotStore& store, const fs::path& dir,
                                          const std::string& season, Timestamp fetched_at) {
    Payloads payloads = read_tree(dir);
    (void)season_from_canonical(payloads, season, dir.string());  // reject bad input before storing
    return store.write(DataSource::historical_csv, season, std::nullopt, payloads, fetched_at);
}

SeasonData load_snapshot_season(const SnapshotStore& store, const SnapshotManifest& m) {
    const Payloads payloads = store.read(m);
    switch (m.source) {
        case DataSource::historical_csv:
            return season_from_canonical(payloads, m.season, store.directory(m).string());
        case DataSource::fpl_api:
            return season_from_fpl_snapshot(payloads, m.season);
        case DataSource::understat_api: {
            SeasonData d;
            d.season = m.season;
            add_understat_snapshot(d, payloads);
            return d;
        }
    }
    throw Error(ErrorKind::internal, "unreachable data source");
}

}  // namespace fplf::ingest
