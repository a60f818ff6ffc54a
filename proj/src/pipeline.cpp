#include "fplf/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "fplf/csv.hpp"
#include "fplf/dataset.hpp"
#include "fplf/ensemble.hpp"
#include "fplf/evaluation.hpp"
#include "fplf/features.hpp"
#include "fplf/synthetic.hpp"

namespace fplf::pipeline {

using nlohmann::json;

namespace {

void log(const std::string& message) { std::cerr << "[fplf] " << message << "\n"; }

std::ostream& out_of(const CommandOptions& o) { return o.out ? *o.out : std::cout; }

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_artifact, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) throw Error(ErrorKind::internal, "cannot write " + tmp);
    }
    fs::rename(tmp, path);
}

// Names the command that produces a missing input.
void require(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path))
        throw Error(ErrorKind::missing_artifact,
                    path.string() + " not found; run `fplf " + producer + "` first");
}

fs::path resolve(const fs::path& p, const fs::path& base) {
    return p.is_absolute() || base.empty() ? p : base / p;
}

// ---------------------------------------------------------------------------
// Provenance: which config and inputs produced which outputs.

struct Provenance {
    std::string command;
    std::string config_hash;
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
};

std::string relative_to(const fs::path& p, const fs::path& root) {
    const auto rel = fs::relative(p, root);
    return rel.empty() ? p.generic_string() : rel.generic_string();
}

std::map<std::string, std::string> checksums(const std::vector<fs::path>& paths, const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& p : paths) out[relative_to(p, root)] = file_checksum(p);
    return out;
}

bool up_to_date(const fs::path& file, const Provenance& want, const fs::path& root) {
    if (!fs::exists(file)) return false;
    try {
        const auto j = json::parse(read_file(file));
        if (j.at("command") != want.command || j.at("config_hash") != want.config_hash) return false;
        if (j.at("inputs").get<std::map<std::string, std::string>>() != want.inputs) return false;
        for (const auto& [rel, sum] : j.at("outputs").get<std::map<std::string, std::string>>()) {
            const auto p = root / rel;
            if (!fs::exists(p) || file_checksum(p) != sum) return false;
        }
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void write_provenance(const fs::path& file, Provenance p, const std::vector<fs::path>& outputs, const fs::path& root) {
    p.outputs = checksums(outputs, root);
    const json j{{"command", p.command}, {"config_hash", p.config_hash}, {"inputs", p.inputs}, {"outputs", p.outputs}};
    write_file(file, j.dump(2) + "\n");
}

void print_plan(const CommandOptions& o, const std::string& command, const std::vector<std::string>& inputs,
                const std::vector<std::string>& outputs) {
    auto& out = out_of(o);
    out << "plan: " << command << "\n";
    for (const auto& i : inputs) out << "  read  " << i << "\n";
    for (const auto& w : outputs) out << "  write " << w << "\n";
}

std::vector<Position> positions_of(const RunConfig& c, const CommandOptions& o) {
    if (o.position) return {*o.position};
    return c.positions;
}

// ---------------------------------------------------------------------------
// Shared loading

struct Loaded {
    std::vector<dataset::PlayerMatchRecord> records;
    std::vector<ingest::Fixture> fixtures;
    dataset::FoldAssignment folds;
};

Loaded load_dataset(const Layout& layout) {
    require(layout.records(), "build-dataset");
    require(layout.fixtures(), "build-dataset");
    require(layout.folds(), "build-dataset");
    return {dataset::read_joined(layout.records()), read_fixtures(layout.fixtures()),
            dataset::FoldAssignment::read(layout.folds())};
}

std::vector<dataset::PlayerMatchRecord> dev_records(const RunConfig& c, const Loaded& d) {
    const std::set<std::string> dev(c.dev_seasons.begin(), c.dev_seasons.end());
    std::vector<dataset::PlayerMatchRecord> out;
    for (const auto& r : d.records)
        if (dev.count(r.fpl.season)) out.push_back(r);
    return out;
}

std::vector<features::FeatureMatrix> fold_matrices(const features::HistoryIndex& index,
                                                   const dataset::DevDataset& dev, Position position) {
    std::vector<features::FeatureMatrix> out;
    for (const auto& fold : dev.folds) out.push_back(features::build_feature_matrix(index, fold, position));
    return out;
}

dataset::EvalWindow window_of(const RunConfig& c) {
    return {c.eval_season, c.eval_first_gameweek, c.eval_last_gameweek, c.expected_teams};
}

search::SearchConfig search_config(const RunConfig& c) {
    return {c.k, c.budget, c.seed, c.stop_rule, c.jobs};
}

std::string model_file(int rank) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "rank%02d.model", rank);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
    if (k < 1) throw Error(ErrorKind::config, "k must be at least 1");
    if (budget < k) throw Error(ErrorKind::config, "budget must be at least k");
    if (jobs < 1) throw Error(ErrorKind::config, "jobs must be at least 1");
    if (horizons.empty()) throw Error(ErrorKind::config, "at least one horizon is required");
    for (int h : horizons)
        if (h < 1) throw Error(ErrorKind::config, "horizons must be positive");
    if (eval_first_gameweek < 1 || eval_last_gameweek < eval_first_gameweek || eval_last_gameweek > ingest::kMaxGameweek)
        throw Error(ErrorKind::config, "invalid evaluation window");
    if (dev_seasons.empty()) throw Error(ErrorKind::config, "no development seasons configured");
    for (const auto& s : seasons()) (void)season_start_year(s);
    weighting.validate();
}

std::vector<std::string> RunConfig::seasons() const {
    std::vector<std::string> out = dev_seasons;
    if (std::find(out.begin(), out.end(), eval_season) == out.end()) out.push_back(eval_season);
    return out;
}

json to_json(const RunConfig& c) {
    json j;
    j["store"] = c.store.generic_string();
    j["artifacts"] = c.artifacts.generic_string();
    j["dev_seasons"] = c.dev_seasons;
    j["eval_season"] = c.eval_season;
    j["eval_first_gameweek"] = c.eval_first_gameweek;
    j["eval_last_gameweek"] = c.eval_last_gameweek;
    j["expected_teams"] = c.expected_teams;
    j["fold_table"] = c.fold_table ? json(c.fold_table->generic_string()) : json(nullptr);
    j["aliases"] = c.aliases ? json(c.aliases->generic_string()) : json(nullptr);
    j["historical"] = json::object();
    for (const auto& [s, p] : c.historical) j["historical"][s] = p.generic_string();
    j["impute_seasons"] = c.impute_seasons;
    j["positions"] = json::array();
    for (auto p : c.positions) j["positions"].push_back(std::string(to_string(p)));
    j["k"] = c.k;
    j["budget"] = c.budget;
    j["stop_rule"] = std::string(search::to_string(c.stop_rule));
    j["seed"] = c.seed;
    j["bins"] = json::object();
    for (const auto& [p, n] : c.weighting.bins_per_position) j["bins"][std::string(to_string(p))] = n;
    j["clip_quantile"] = c.weighting.clip_quantile;
    j["horizons"] = c.horizons;
    j["jobs"] = c.jobs;
    j["methods"] = c.methods;
    j["last5_played_only"] = c.last5_played_only;
    j["external_forecasts"] = json::object();
    for (const auto& [m, p] : c.external_forecasts) j["external_forecasts"][m] = p.generic_string();
    j["external_aliases"] = c.external_aliases ? json(c.external_aliases->generic_string()) : json(nullptr);
    j["endpoints"] = {{"fpl_base", c.endpoints.fpl_base},
                      {"understat_league", c.endpoints.understat_league},
                      {"understat_player", c.endpoints.understat_player},
                      {"attempts", c.endpoints.attempts}};
    return j;
}

RunConfig config_from_json(const json& j, const fs::path& base) {
    static const std::set<std::string> known{
        "store", "artifacts", "dev_seasons", "eval_season", "eval_first_gameweek", "eval_last_gameweek",
        "expected_teams", "fold_table", "aliases", "historical", "impute_seasons", "positions", "k", "budget",
        "stop_rule", "seed", "bins", "clip_quantile", "horizons", "jobs", "methods", "last5_played_only",
        "external_forecasts", "external_aliases", "endpoints"};
    if (!j.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    RunConfig c;
    try {
        const auto path_of = [&](const char* key) { return resolve(j.at(key).get<std::string>(), base); };
        const auto opt_path = [&](const char* key) -> std::optional<fs::path> {
            if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
            return path_of(key);
        };
        if (j.contains("store")) c.store = path_of("store");
        else c.store = resolve(c.store, base);
        if (j.contains("artifacts")) c.artifacts = path_of("artifacts");
        else c.artifacts = resolve(c.artifacts, base);
        if (j.contains("dev_seasons")) c.dev_seasons = j.at("dev_seasons").get<std::vector<std::string>>();
        if (j.contains("eval_season")) c.eval_season = j.at("eval_season").get<std::string>();
        if (j.contains("eval_first_gameweek")) c.eval_first_gameweek = j.at("eval_first_gameweek").get<int>();
        if (j.contains("eval_last_gameweek")) c.eval_last_gameweek = j.at("eval_last_gameweek").get<int>();
        if (j.contains("expected_teams")) c.expected_teams = j.at("expected_teams").get<int>();
        c.fold_table = opt_path("fold_table");
        c.aliases = opt_path("aliases");
        if (j.contains("historical"))
            for (const auto& [s, p] : j.at("historical").items()) c.historical[s] = resolve(p.get<std::string>(), base);
        if (j.contains("impute_seasons")) c.impute_seasons = j.at("impute_seasons").get<std::vector<std::string>>();
        if (j.contains("positions")) {
            c.positions.clear();
            for (const auto& p : j.at("positions")) c.positions.push_back(parse_position(p.get<std::string>()));
        }
        if (j.contains("k")) c.k = j.at("k").get<int>();
        if (j.contains("budget")) c.budget = j.at("budget").get<int>();
        if (j.contains("stop_rule")) c.stop_rule = search::parse_stop_rule(j.at("stop_rule").get<std::string>());
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("bins"))
            for (const auto& [p, n] : j.at("bins").items()) c.weighting.bins_per_position[parse_position(p)] = n.get<int>();
        if (j.contains("clip_quantile")) c.weighting.clip_quantile = j.at("clip_quantile").get<double>();
        if (j.contains("horizons")) c.horizons = j.at("horizons").get<std::vector<int>>();
        if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
        if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
        if (j.contains("last5_played_only")) c.last5_played_only = j.at("last5_played_only").get<bool>();
        if (j.contains("external_forecasts"))
            for (const auto& [m, p] : j.at("external_forecasts").items())
                c.external_forecasts[m] = resolve(p.get<std::string>(), base);
        c.external_aliases = opt_path("external_aliases");
        if (j.contains("endpoints")) {
            const auto& e = j.at("endpoints");
            if (e.contains("fpl_base")) c.endpoints.fpl_base = e.at("fpl_base").get<std::string>();
            if (e.contains("understat_league")) c.endpoints.understat_league = e.at("understat_league").get<std::string>();
            if (e.contains("understat_player")) c.endpoints.understat_player = e.at("understat_player").get<std::string>();
            if (e.contains("attempts")) c.endpoints.attempts = e.at("attempts").get<int>();
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, std::string("invalid config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::config, "config file not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::config, path.string() + ": " + e.what());
    }
    return config_from_json(j, fs::absolute(path).parent_path());
}

std::string config_hash(const RunConfig& c) {
    auto j = to_json(c);
    // Input files enter provenance through their content checksums instead.
    for (const char* key : {"jobs", "store", "artifacts", "fold_table", "aliases", "historical", "external_forecasts",
                            "external_aliases"})
        j.erase(key);
    return sha256_hex(j.dump());
}

fs::path Layout::search_dir(Position p, int fold) const {
    return root / "search" / std::string(to_string(p)) / dataset::fold_label(fold);
}

fs::path Layout::ensemble_dir(Position p) const { return root / "ensembles" / std::string(to_string(p)); }

std::string file_checksum(const fs::path& path) {
    if (fs::is_directory(path)) {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(path))
            if (e.is_regular_file()) files[fs::relative(e.path(), path).generic_string()] = file_checksum(e.path());
        std::string acc;
        for (const auto& [name, sum] : files) acc += name + '\0' + sum + '\n';
        return sha256_hex(acc);
    }
    return sha256_hex(read_file(path));
}

void write_fixtures(const fs::path& path, std::span<const ingest::Fixture> fixtures) {
    csv::Table t({"season", "gameweek", "home_team", "away_team", "kickoff", "deadline"});
    for (const auto& f : fixtures)
        t.add_row({f.season, std::to_string(f.gameweek), f.home_team, f.away_team, format_timestamp(f.kickoff),
                   format_timestamp(f.deadline)});
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    t.write(path);
}

std::vector<ingest::Fixture> read_fixtures(const fs::path& path) {
    const auto t = csv::Table::read(path);
    t.require_columns({"season", "gameweek", "home_team", "away_team", "kickoff", "deadline"});
    std::vector<ingest::Fixture> out;
    for (std::size_t r = 0; r < t.size(); ++r)
        out.push_back({t.cell(r, "season"), static_cast<int>(t.get_int(r, "gameweek")), t.cell(r, "home_team"),
                       t.cell(r, "away_team"), parse_timestamp(t.cell(r, "kickoff")),
                       parse_timestamp(t.cell(r, "deadline"))});
    return out;
}

// ---------------------------------------------------------------------------
// ingest

bool run_ingest(const RunConfig& config, const CommandOptions& options, ingest::HttpClient* client) {
    const Layout layout{config.artifacts};
    if (options.live) {
        if (!options.live_season || !options.live_gameweek)
            throw Error(ErrorKind::config, "live ingest needs --season and --gameweek");
        if (options.dry_run) {
            print_plan(options, "ingest (live)", {config.endpoints.fpl_base, config.endpoints.understat_league},
                       {config.store.string()});
            return false;
        }
        std::unique_ptr<ingest::HttpClient> owned;
        if (!client) {
            owned = ingest::make_http_client();
            client = owned.get();
        }
        ingest::SnapshotStore store(config.store);
        const auto now = std::chrono::duration_cast<std::chrono::seconds>(
                             std::chrono::system_clock::now().time_since_epoch()).count();
        for (auto source : {ingest::DataSource::fpl_api, ingest::DataSource::understat_api}) {
            const auto m = ingest::fetch_live_snapshot(store, *client, source, *options.live_season,
                                                       *options.live_gameweek, now, config.endpoints);
            log("stored " + std::string(ingest::to_string(source)) + " snapshot " + m.snapshot_id + " for " +
                m.season + " gw" + std::to_string(*options.live_gameweek));
        }
        return true;
    }

    Provenance want{"ingest", config_hash(config), {}, {}};
    std::vector<std::string> inputs;
    for (const auto& [season, dir] : config.historical) {
        if (!fs::is_directory(dir)) throw Error(ErrorKind::data, "historical directory not found: " + dir.string());
        want.inputs[season] = file_checksum(dir);
        inputs.push_back(dir.string());
    }
    if (options.dry_run) {
        print_plan(options, "ingest", inputs, {config.store.string(), layout.ingest_provenance().string()});
        return false;
    }
    if (config.historical.empty()) log("no historical seasons configured; nothing to import");
    ingest::SnapshotStore store(config.store);
    bool current = !options.force && up_to_date(layout.ingest_provenance(), want, layout.root);
    if (current) {
        for (const auto& [season, _] : config.historical)
            if (!store.latest(ingest::DataSource::historical_csv, season)) current = false;
    }
    if (current) {
        log("ingest: inputs unchanged, nothing to do");
        return false;
    }
    for (const auto& [season, dir] : config.historical) {
        const auto latest = store.latest(ingest::DataSource::historical_csv, season);
        const auto payload_sum = ingest::payload_checksum([&] {
            ingest::Payloads p;
            for (const auto& e : fs::recursive_directory_iterator(dir))
                if (e.is_regular_file()) p[fs::relative(e.path(), dir).generic_string()] = read_file(e.path());
            return p;
        }());
        if (latest && latest->content_checksum == payload_sum) {
            log("ingest: " + season + " already stored as snapshot " + latest->snapshot_id);
            continue;
        }
        const auto m = ingest::import_historical_season(store, dir, season, parse_timestamp("2000-01-01"));
        log("ingest: stored " + season + " as snapshot " + m.snapshot_id);
    }
    write_provenance(layout.ingest_provenance(), want, {}, layout.root);
    return true;
}

// ---------------------------------------------------------------------------
// build-dataset

namespace {

struct SeasonSource {
    ingest::SeasonData data;
    std::string checksum;
};

SeasonSource load_season(const ingest::SnapshotStore& store, const std::string& season) {
    if (auto m = store.latest(ingest::DataSource::historical_csv, season))
        return {ingest::load_snapshot_season(store, *m), m->content_checksum};
    auto fpl = store.latest(ingest::DataSource::fpl_api, season);
    if (!fpl)
        throw Error(ErrorKind::missing_artifact,
                    "no snapshot for season " + season + " in " + store.root().string() + "; run `fplf ingest` first");
    SeasonSource s{ingest::load_snapshot_season(store, *fpl), fpl->content_checksum};
    if (auto us = store.latest(ingest::DataSource::understat_api, season)) {
        const auto extra = ingest::load_snapshot_season(store, *us);
        s.data.understat_players.insert(s.data.understat_players.end(), extra.understat_players.begin(),
                                        extra.understat_players.end());
        s.data.understat_teams.insert(s.data.understat_teams.end(), extra.understat_teams.begin(),
                                      extra.understat_teams.end());
        s.checksum += "+" + us->content_checksum;
    }
    return s;
}

}  // namespace

bool run_build_dataset(const RunConfig& config, const CommandOptions& options) {
    const Layout layout{config.artifacts};
    const std::vector<fs::path> outputs{layout.records(), layout.fixtures(), layout.folds()};
    if (options.dry_run) {
        std::vector<std::string> inputs{config.store.string()};
        if (config.aliases) inputs.push_back(config.aliases->string());
        if (config.fold_table) inputs.push_back(config.fold_table->string());
        std::vector<std::string> outs;
        for (const auto& o : outputs) outs.push_back(o.string());
        print_plan(options, "build-dataset", inputs, outs);
        return false;
    }
    ingest::SnapshotStore store(config.store);
    Provenance want{"build-dataset", config_hash(config), {}, {}};
    std::vector<SeasonSource> seasons;
    for (const auto& s : config.seasons()) {
        seasons.push_back(load_season(store, s));
        want.inputs["snapshot:" + s] = seasons.back().checksum;
    }
    if (config.aliases) want.inputs["aliases"] = file_checksum(*config.aliases);
    if (config.fold_table) want.inputs["fold_table"] = file_checksum(*config.fold_table);
    if (!options.force && up_to_date(layout.dataset_provenance(), want, layout.root)) {
        log("build-dataset: inputs unchanged, nothing to do");
        return false;
    }

    dataset::AliasTable aliases;
    if (config.aliases) aliases = dataset::AliasTable::read(*config.aliases);
    std::vector<dataset::PlayerMatchRecord> all;
    std::vector<ingest::Fixture> fixtures;
    std::map<std::string, std::vector<dataset::PlayerMatchRecord>> by_season;
    for (const auto& s : seasons) {
        auto joined = dataset::join_sources(s.data, aliases);
        if (!joined.unmatched_players.empty())
            log("build-dataset: " + s.data.season + ": " + std::to_string(joined.unmatched_players.size()) +
                " players without an Understat link");
        by_season[s.data.season] = std::move(joined.records);
        fixtures.insert(fixtures.end(), s.data.fixtures.begin(), s.data.fixtures.end());
    }
    for (const auto& season : config.impute_seasons) {
        auto it = by_season.find(season);
        if (it == by_season.end()) continue;
        std::vector<dataset::PlayerMatchRecord> donors;
        for (const auto& d : config.dev_seasons)
            if (d != season && by_season.count(d))
                for (const auto& r : by_season[d])
                    if (r.understat_player && r.fpl.position != Position::AM) donors.push_back(r);
        std::vector<dataset::PlayerMatchRecord> targets;
        std::vector<std::size_t> where;
        for (std::size_t i = 0; i < it->second.size(); ++i)
            if (!it->second[i].understat_player && it->second[i].fpl.position != Position::AM) {
                targets.push_back(it->second[i]);
                where.push_back(i);
            }
        if (targets.empty()) continue;
        if (donors.empty()) fail("no donor records to impute Understat data for " + season);
        const auto relaxed = dataset::impute_records(targets, donors);
        for (std::size_t i = 0; i < where.size(); ++i) it->second[where[i]] = std::move(targets[i]);
        log("build-dataset: imputed " + std::to_string(targets.size()) + " records of " + season + " (" +
            std::to_string(relaxed.size()) + " relaxed matches)");
    }
    for (const auto& s : config.seasons())
        for (auto& r : by_season[s]) all.push_back(std::move(r));
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return std::tie(a.fpl.season, a.fpl.gameweek, a.kickoff, a.fpl.player_id) <
               std::tie(b.fpl.season, b.fpl.gameweek, b.kickoff, b.fpl.player_id);
    });
    std::stable_sort(fixtures.begin(), fixtures.end(), [](const auto& a, const auto& b) {
        return std::tie(a.season, a.gameweek, a.kickoff, a.home_team) <
               std::tie(b.season, b.gameweek, b.kickoff, b.home_team);
    });

    const auto table = config.fold_table ? dataset::FoldAssignment::read(*config.fold_table)
                                         : dataset::FoldAssignment::development_table();
    std::vector<dataset::PlayerMatchRecord> dev;
    const std::set<std::string> dev_set(config.dev_seasons.begin(), config.dev_seasons.end());
    for (const auto& r : all)
        if (dev_set.count(r.fpl.season)) dev.push_back(r);
    const auto ts = dataset::team_seasons(dev);
    const auto folds = dataset::assign_folds(ts, table);
    const auto counts = dataset::fold_team_season_counts(ts, folds);
    std::string summary;
    for (std::size_t f = 0; f < counts.size(); ++f)
        summary += (f ? ", " : "") + dataset::fold_label(static_cast<int>(f)) + "=" + std::to_string(counts[f]);
    log("build-dataset: team-seasons per fold: " + summary);
    (void)dataset::build_eval_dataset(all, window_of(config));

    fs::create_directories(layout.records().parent_path());
    dataset::write_joined(layout.records(), all);
    write_fixtures(layout.fixtures(), fixtures);
    folds.write(layout.folds());
    write_provenance(layout.dataset_provenance(), want, outputs, layout.root);
    log("build-dataset: wrote " + std::to_string(all.size()) + " records");
    return true;
}

// ---------------------------------------------------------------------------
// search

bool run_search(const RunConfig& config, const CommandOptions& options) {
    const Layout layout{config.artifacts};
    const auto positions = positions_of(config, options);
    if (options.dry_run) {
        std::vector<std::string> outs;
        for (auto p : positions) outs.push_back((layout.root / "search" / std::string(to_string(p))).string());
        print_plan(options, "search (K=" + std::to_string(config.k) + ", budget=" + std::to_string(config.budget) + ")",
                   {layout.records().string(), layout.folds().string()}, outs);
        return false;
    }
    const auto data = load_dataset(layout);
    const std::map<std::string, std::string> inputs{
        {relative_to(layout.records(), layout.root), file_checksum(layout.records())},
        {relative_to(layout.folds(), layout.root), file_checksum(layout.folds())}};
    const auto hash = config_hash(config);
    const auto n_folds = data.folds.n_folds();
    if (options.fold && (*options.fold < 0 || *options.fold >= n_folds))
        throw Error(ErrorKind::config, "fold " + dataset::fold_label(*options.fold) + " does not exist");

    std::optional<features::HistoryIndex> index;
    std::optional<dataset::DevDataset> dev;
    bool worked = false;
    const auto& space = search::enumerate_space();
    for (auto position : positions) {
        std::vector<int> fold_ids;
        for (int f = 0; f < n_folds; ++f)
            if (!options.fold || *options.fold == f) fold_ids.push_back(f);
        std::vector<int> pending;
        for (int f : fold_ids) {
            const Provenance want{"search", hash, inputs, {}};
            if (!options.force && up_to_date(layout.search_dir(position, f) / "provenance.json", want, layout.root))
                log("search " + std::string(to_string(position)) + " " + dataset::fold_label(f) + ": up to date");
            else
                pending.push_back(f);
        }
        if (pending.empty()) continue;
        if (!index) {
            const auto devr = dev_records(config, data);
            dev = dataset::build_dev_dataset(devr, data.folds);
            index.emplace(data.records, data.fixtures);
        }
        const auto matrices = fold_matrices(*index, *dev, position);
        for (int f : pending) {
            const auto dir = layout.search_dir(position, f);
            const std::string where = std::string(to_string(position)) + " " + dataset::fold_label(f);
            fs::create_directories(dir);
            search::FoldProblem problem;
            try {
                problem = search::make_fold_problem(matrices, f, config.weighting);
            } catch (const Error& e) {
                throw Error(e.kind(), "search " + where + ": " + e.what());
            }
            if (options.export_features) {
                features::FeatureMatrix valid = matrices[static_cast<std::size_t>(f)];
                features::export_feature_matrix(dir / "validation_features.csv", valid, &problem.w_valid);
            }
            const auto log_path = dir / "log.csv";
            const auto timing_path = dir / "timing.csv";
            const auto prior = search::read_log(log_path);
            if (!prior.empty()) log("search " + where + ": resuming with " + std::to_string(prior.size()) + " logged evaluations");
            const auto t0 = std::chrono::steady_clock::now();
            auto result = search::kbest_search(
                space, f, search_config(config),
                [&problem](const search::Candidate& c, std::uint64_t seed) {
                    return search::evaluate_candidate(c, problem, seed);
                },
                prior,
                [&](const search::Evaluation& e, double seconds) {
                    search::append_log(log_path, e);
                    std::ofstream t(timing_path, std::ios::app);
                    t << e.order << "," << format_double(seconds) << "\n";
                });
            search::write_log(log_path, result.log);

            json summary;
            summary["position"] = to_string(position);
            summary["fold"] = dataset::fold_label(f);
            summary["threshold"] = result.threshold;
            summary["evaluations"] = result.log.size();
            summary["scaler"] = ensemble::scaler_to_json(problem.scaler);
            summary["top"] = json::array();
            std::vector<fs::path> outputs{log_path, dir / "result.json"};
            int rank = 0;
            for (const auto& t : result.top) {
                const auto file = model_file(++rank);
                trees::save_model(dir / file, *t.model, features::schema_for(position).version());
                outputs.push_back(dir / file);
                summary["top"].push_back({{"rank", rank},
                                          {"encoding", t.candidate.encoding()},
                                          {"candidate_index", t.candidate.index},
                                          {"rmse", t.rmse},
                                          {"file", file}});
            }
            write_file(dir / "result.json", summary.dump(2) + "\n");
            write_provenance(dir / "provenance.json", {"search", hash, inputs, {}}, outputs, layout.root);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            log("search " + where + ": " + std::to_string(result.log.size()) + " evaluations, best RMSE " +
                format_double(result.top.front().rmse) + " (" + std::to_string(static_cast<int>(secs)) + " s)");
            worked = true;
        }
    }
    return worked;
}

// ---------------------------------------------------------------------------
// train-ensembles

bool run_train_ensembles(const RunConfig& config, const CommandOptions& options) {
    const Layout layout{config.artifacts};
    const auto positions = positions_of(config, options);
    if (options.dry_run) {
        std::vector<std::string> ins, outs;
        for (auto p : positions) {
            ins.push_back((layout.root / "search" / std::string(to_string(p))).string());
            outs.push_back(layout.ensemble_dir(p).string());
        }
        print_plan(options, "train-ensembles", ins, outs);
        return false;
    }
    require(layout.folds(), "build-dataset");
    const auto folds = dataset::FoldAssignment::read(layout.folds());
    const auto hash = config_hash(config);
    bool worked = false;
    for (auto position : positions) {
        Provenance want{"train-ensembles", hash, {}, {}};
        for (int f = 0; f < folds.n_folds(); ++f) {
            const auto result = layout.search_dir(position, f) / "result.json";
            require(result, "search");
            want.inputs[relative_to(layout.search_dir(position, f), layout.root)] =
                file_checksum(layout.search_dir(position, f) / "provenance.json");
        }
        const auto dir = layout.ensemble_dir(position);
        if (!options.force && up_to_date(dir / "provenance.json", want, layout.root)) {
            log("train-ensembles " + std::string(to_string(position)) + ": up to date");
            continue;
        }
        ensemble::PositionEnsemble e;
        e.position = position;
        e.schema_version = features::schema_for(position).version();
        e.n_features = static_cast<int>(features::schema_for(position).size());
        e.data_checksum = file_checksum(layout.records());
        e.seed = config.seed;
        e.k = config.k;
        e.budget = config.budget;
        for (int f = 0; f < folds.n_folds(); ++f) {
            const auto sdir = layout.search_dir(position, f);
            const auto summary = json::parse(read_file(sdir / "result.json"));
            e.fold_scalers[f] = ensemble::scaler_from_json(summary.at("scaler"));
            const auto& top = summary.at("top");
            if (static_cast<int>(top.size()) != config.k)
                throw Error(ErrorKind::missing_artifact, sdir.string() + " holds " + std::to_string(top.size()) +
                                                             " models, expected K=" + std::to_string(config.k) +
                                                             "; rerun `fplf search`");
            for (const auto& t : top) {
                ensemble::Member m;
                m.fold = f;
                m.rank = t.at("rank").get<int>();
                m.encoding = t.at("encoding").get<std::string>();
                m.validation_rmse = t.at("rmse").get<double>();
                m.model = trees::load_model(sdir / t.at("file").get<std::string>(), e.n_features);
                e.members.push_back(std::move(m));
            }
        }
        if (fs::exists(dir)) fs::remove_all(dir);
        ensemble::save_ensemble(dir, e);
        write_provenance(dir / "provenance.json", want, {dir / "manifest.json", dir / "models"}, layout.root);
        log("train-ensembles " + std::string(to_string(position)) + ": " + std::to_string(e.members.size()) + " models");
        worked = true;
    }
    return worked;
}

// ---------------------------------------------------------------------------
// forecast

bool run_forecast(const RunConfig& config, const CommandOptions& options) {
    const Layout layout{config.artifacts};
    std::vector<int> deadlines;
    if (options.gameweeks) deadlines = *options.gameweeks;
    else
        for (int g = config.eval_first_gameweek; g <= config.eval_last_gameweek; ++g) deadlines.push_back(g);
    std::vector<std::string> methods;
    for (const auto& m : config.methods)
        if (m == "ensemble" || m == "last5") methods.push_back(m);
    if (options.dry_run) {
        std::vector<std::string> ins{layout.records().string(), layout.fixtures().string()};
        for (auto p : config.positions) ins.push_back(layout.ensemble_dir(p).string());
        std::vector<std::string> outs;
        for (const auto& m : methods) outs.push_back(layout.forecast(m).string());
        print_plan(options, "forecast", ins, outs);
        return false;
    }
    Provenance want{"forecast", config_hash(config), {}, {}};
    require(layout.records(), "build-dataset");
    require(layout.fixtures(), "build-dataset");
    want.inputs["records"] = file_checksum(layout.records());
    want.inputs["fixtures"] = file_checksum(layout.fixtures());
    std::string deadline_text;
    for (int d : deadlines) deadline_text += std::to_string(d) + ",";
    want.inputs["deadlines"] = deadline_text;
    const bool need_ensembles = std::find(methods.begin(), methods.end(), "ensemble") != methods.end();
    if (need_ensembles)
        for (auto p : config.positions) {
            require(layout.ensemble_dir(p) / "manifest.json", "train-ensembles");
            want.inputs["ensemble:" + std::string(to_string(p))] = file_checksum(layout.ensemble_dir(p) / "manifest.json");
        }
    const auto prov = layout.forecasts_dir() / "provenance.json";
    if (!options.force && up_to_date(prov, want, layout.root)) {
        log("forecast: inputs unchanged, nothing to do");
        return false;
    }

    const auto records = dataset::read_joined(layout.records());
    const auto fixtures = read_fixtures(layout.fixtures());
    std::map<Position, ensemble::PositionEnsemble> ensembles;
    if (need_ensembles)
        for (auto p : config.positions) ensembles.emplace(p, ensemble::load_ensemble(layout.ensemble_dir(p)));
    const features::HistoryIndex index(records, fixtures);
    std::vector<std::string> warnings;
    std::vector<ensemble::ForecastSlot> slots;
    const std::set<Position> wanted(config.positions.begin(), config.positions.end());
    for (int d : deadlines)
        for (auto& s : ensemble::forecast_slots(records, fixtures, config.eval_season, d, config.horizons, &warnings))
            if (wanted.count(s.player.position)) slots.push_back(std::move(s));
    for (const auto& w : warnings) log("forecast: " + w);

    std::vector<fs::path> outputs;
    fs::create_directories(layout.forecasts_dir());
    for (const auto& m : methods) {
        std::vector<ensemble::Forecast> f;
        if (m == "ensemble") {
            f = ensemble::forecast_with_ensembles(ensembles, index, slots);
            ensemble::write_member_outputs(layout.forecasts_dir() / "ensemble_members.csv", f, ensembles);
            outputs.push_back(layout.forecasts_dir() / "ensemble_members.csv");
        } else {
            f = evaluation::last5_forecasts(index, slots, config.last5_played_only);
        }
        ensemble::write_forecasts(layout.forecast(m), f);
        outputs.push_back(layout.forecast(m));
        log("forecast: " + m + ": " + std::to_string(f.size()) + " forecasts");
    }
    write_provenance(prov, want, outputs, layout.root);
    return true;
}

// ---------------------------------------------------------------------------
// evaluate / report

bool run_evaluate(const RunConfig& config, const CommandOptions& options) {
    const Layout layout{config.artifacts};
    const auto dir = layout.reports_dir();
    if (options.dry_run) {
        std::vector<std::string> ins{layout.records().string()};
        for (const auto& m : config.methods)
            ins.push_back(config.external_forecasts.count(m) ? config.external_forecasts.at(m).string()
                                                              : layout.forecast(m).string());
        print_plan(options, "evaluate", ins,
                   {(dir / "evaluation.csv").string(), (dir / "coverage.csv").string(), (dir / "report.txt").string()});
        return false;
    }
    require(layout.records(), "build-dataset");
    Provenance want{"evaluate", config_hash(config), {}, {}};
    want.inputs["records"] = file_checksum(layout.records());
    for (const auto& m : config.methods) {
        const auto path = config.external_forecasts.count(m) ? config.external_forecasts.at(m) : layout.forecast(m);
        if (!config.external_forecasts.count(m)) require(path, "forecast");
        else if (!fs::exists(path)) throw Error(ErrorKind::missing_artifact, "external forecast not found: " + path.string());
        want.inputs["method:" + m] = file_checksum(path);
    }
    if (config.external_aliases && fs::exists(*config.external_aliases))
        want.inputs["external_aliases"] = file_checksum(*config.external_aliases);
    if (!options.force && up_to_date(dir / "provenance.json", want, layout.root)) {
        log("evaluate: inputs unchanged, nothing to do");
        return false;
    }
    const auto records = dataset::read_joined(layout.records());
    const auto eval = dataset::build_eval_dataset(records, window_of(config));
    const auto actuals = evaluation::window_actuals(eval, config.horizons);
    std::map<std::string, std::vector<ensemble::Forecast>> by_method;
    for (const auto& m : config.methods) {
        if (auto ext = config.external_forecasts.find(m); ext != config.external_forecasts.end()) {
            std::vector<std::string> unmatched;
            by_method[m] = evaluation::convert_external_forecasts(ext->second, actuals, config.external_aliases, &unmatched);
            if (!unmatched.empty())
                log("evaluate: " + m + ": " + std::to_string(unmatched.size()) + " external rows could not be matched");
        } else {
            by_method[m] = ensemble::read_forecasts(layout.forecast(m));
        }
    }
    const auto report = evaluation::evaluate(by_method, actuals, config.horizons);
    fs::create_directories(dir);
    evaluation::write_report_csv(dir / "evaluation.csv", report);
    evaluation::write_coverage(dir / "coverage.csv", report);
    write_file(dir / "report.txt", evaluation::format_report(report));
    write_provenance(dir / "provenance.json", want,
                     {dir / "evaluation.csv", dir / "coverage.csv", dir / "report.txt"}, layout.root);
    log("evaluate: wrote " + (dir / "evaluation.csv").string());
    return true;
}

bool run_report(const RunConfig& config, const CommandOptions& options) {
    const Layout layout{config.artifacts};
    const auto report = layout.reports_dir() / "report.txt";
    if (options.dry_run) {
        print_plan(options, "report", {report.string(), (layout.root / "search").string()},
                   {(layout.reports_dir() / "search_summary.csv").string()});
        return false;
    }
    require(report, "evaluate");
    auto& out = out_of(options);
    out << read_file(report);

    csv::Table summary({"position", "fold", "evaluations", "threshold", "rank", "encoding", "rmse"});
    const auto n_folds = fs::exists(layout.folds()) ? dataset::FoldAssignment::read(layout.folds()).n_folds() : 0;
    for (auto p : positions_of(config, options))
        for (int f = 0; f < n_folds; ++f) {
            const auto path = layout.search_dir(p, f) / "result.json";
            if (!fs::exists(path)) continue;
            const auto j = json::parse(read_file(path));
            for (const auto& t : j.at("top"))
                summary.add_row({std::string(to_string(p)), dataset::fold_label(f),
                                 std::to_string(j.at("evaluations").get<int>()),
                                 format_double(j.at("threshold").get<double>()), std::to_string(t.at("rank").get<int>()),
                                 t.at("encoding").get<std::string>(), format_double(t.at("rmse").get<double>())});
        }
    if (summary.size()) {
        summary.write(layout.reports_dir() / "search_summary.csv");
        out << "\nSearch summary: " << (layout.reports_dir() / "search_summary.csv").string() << "\n";
    }
    return true;
}

void run_all(const RunConfig& config, const CommandOptions& options) {
    run_ingest(config, options);
    run_build_dataset(config, options);
    run_search(config, options);
    run_train_ensembles(config, options);
    run_forecast(config, options);
    run_evaluate(config, options);
}

RunConfig write_synthetic_workspace(const fs::path& dir, std::uint64_t league_seed) {
    synthetic::LeagueConfig lc;
    lc.seed = league_seed;
    const auto league = synthetic::generate_league(lc);
    synthetic::write_league(dir / "league", league);

    RunConfig c;
    c.store = "store";
    c.artifacts = "artifacts";
    c.dev_seasons = {lc.seasons.front()};
    c.eval_season = lc.seasons.back();
    c.eval_first_gameweek = 8;
    c.eval_last_gameweek = 2 * (lc.n_teams - 1);
    c.expected_teams = lc.n_teams;
    c.fold_table = fs::path("league") / "folds.csv";
    c.aliases = fs::path("league") / "aliases.csv";
    for (const auto& s : lc.seasons) c.historical[s] = fs::path("league") / "seasons" / s;
    c.impute_seasons.clear();
    c.k = 2;
    c.budget = 20;
    c.stop_rule = search::StopRule::budget;
    write_file(dir / "config.json", to_json(c).dump(2) + "\n");
    return load_config(dir / "config.json");
}

}  // namespace fplf::pipeline
