#include "fplf/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <numeric>

#include "fplf/csv.hpp"

namespace fplf::search {

namespace {

std::map<std::string, std::string> parse_fields(const std::string& body, const std::string& text) {
    std::map<std::string, std::string> out;
    for (const auto& part : split(body, ',')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::data, "malformed candidate encoding: " + text);
        out[part.substr(0, eq)] = part.substr(eq + 1);
    }
    return out;
}

const std::string& field(const std::map<std::string, std::string>& f, const std::string& key, const std::string& text) {
    auto it = f.find(key);
    if (it == f.end()) throw Error(ErrorKind::data, "candidate encoding lacks '" + key + "': " + text);
    return it->second;
}

std::vector<Candidate> build_space() {
    std::vector<Candidate> out;
    for (int n : {200, 400, 800})
        for (std::optional<int> depth : {std::optional<int>(10), std::optional<int>(20), std::optional<int>()})
            for (int mss : {2, 5})
                for (int msl : {1, 2, 5})
                    for (auto mf : {trees::MaxFeatures::square_root(), trees::MaxFeatures::of(0.2),
                                    trees::MaxFeatures::of(1.0)})
                        for (bool bs : {true, false}) {
                            Candidate c;
                            c.kind = ModelKind::random_forest;
                            c.hyperparams = RfHyperparams{n, depth, mss, msl, mf, bs};
                            c.index = out.size();
                            out.push_back(c);
                        }
    for (int n : {300, 600, 1200})
        for (int depth : {3, 5, 7})
            for (double lr : {0.01, 0.05, 0.1})
                for (double ss : {0.5, 0.75, 1.0})
                    for (double cs : {0.5, 0.75, 1.0})
                        for (double mcw : {1.0, 5.0})
                            for (double gamma : {0.0, 0.1})
                                for (double lambda : {1.0, 5.0}) {
                                    Candidate c;
                                    c.kind = ModelKind::gbdt;
                                    c.hyperparams = GbdtHyperparams{n, depth, lr, ss, cs, mcw, gamma, lambda};
                                    c.index = out.size();
                                    out.push_back(c);
                                }
    return out;
}

}  // namespace

std::string Candidate::encoding() const {
    if (kind == ModelKind::random_forest) {
        const auto& h = std::get<RfHyperparams>(hyperparams);
        return "rf:n=" + std::to_string(h.n_estimators) +
               ",depth=" + (h.max_depth ? std::to_string(*h.max_depth) : std::string("none")) +
               ",mss=" + std::to_string(h.min_samples_split) + ",msl=" + std::to_string(h.min_samples_leaf) +
               ",mf=" + h.max_features.to_string() + ",bootstrap=" + (h.bootstrap ? "1" : "0");
    }
    const auto& h = std::get<GbdtHyperparams>(hyperparams);
    return "gbdt:n=" + std::to_string(h.n_estimators) + ",depth=" + std::to_string(h.max_depth) +
           ",lr=" + format_double(h.learning_rate) + ",subsample=" + format_double(h.subsample) +
           ",colsample=" + format_double(h.colsample_bytree) + ",mcw=" + format_double(h.min_child_weight) +
           ",gamma=" + format_double(h.gamma) + ",lambda=" + format_double(h.reg_lambda);
}

Candidate Candidate::decode(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::data, "malformed candidate encoding: " + text);
    const std::string kind = text.substr(0, colon);
    const auto f = parse_fields(text.substr(colon + 1), text);
    const auto num = [&](const char* key) { return std::stod(field(f, key, text)); };
    const auto integer = [&](const char* key) { return std::stoi(field(f, key, text)); };
    Candidate c;
    try {
        if (kind == "rf") {
            RfHyperparams h;
            h.n_estimators = integer("n");
            const auto& depth = field(f, "depth", text);
            if (depth != "none") h.max_depth = std::stoi(depth);
            h.min_samples_split = integer("mss");
            h.min_samples_leaf = integer("msl");
            const auto& mf = field(f, "mf", text);
            h.max_features = mf == "sqrt" ? trees::MaxFeatures::square_root() : trees::MaxFeatures::of(std::stod(mf));
            h.bootstrap = field(f, "bootstrap", text) == "1";
            c.kind = ModelKind::random_forest;
            c.hyperparams = h;
        } else if (kind == "gbdt") {
            c.kind = ModelKind::gbdt;
            c.hyperparams = GbdtHyperparams{integer("n"),     integer("depth"), num("lr"),    num("subsample"),
                                            num("colsample"), num("mcw"),       num("gamma"), num("lambda")};
        } else {
            throw Error(ErrorKind::data, "unknown candidate kind in: " + text);
        }
    } catch (const std::logic_error&) {
        throw Error(ErrorKind::data, "malformed candidate encoding: " + text);
    }
    const auto& space = enumerate_space();
    auto it = std::find_if(space.begin(), space.end(), [&](const Candidate& s) {
        return s.kind == c.kind && s.hyperparams == c.hyperparams;
    });
    c.index = it == space.end() ? space.size() : it->index;
    return c;
}

const std::vector<Candidate>& enumerate_space() {
    static const std::vector<Candidate> space = build_space();
    return space;
}

std::size_t index_of(const std::string& encoding) {
    const auto c = Candidate::decode(encoding);
    if (c.index >= enumerate_space().size()) throw Error(ErrorKind::data, "candidate not in search space: " + encoding);
    return c.index;
}

// ---------------------------------------------------------------------------

FoldProblem make_fold_problem(std::span<const features::FeatureMatrix> folds, int fold,
                              const weighting::WeightingConfig& weighting) {
    if (fold < 0 || fold >= static_cast<int>(folds.size()))
        throw Error(ErrorKind::config, "fold " + std::to_string(fold) + " out of range");
    const auto& held_out = folds[static_cast<std::size_t>(fold)];
    const Position position = held_out.position;
    const std::string where = std::string(to_string(position)) + " fold " + dataset::fold_label(fold);
    if (held_out.rows() == 0) fail("no samples for " + where);
    std::vector<const features::FeatureMatrix*> parts;
    for (std::size_t k = 0; k < folds.size(); ++k)
        if (static_cast<int>(k) != fold) parts.push_back(&folds[k]);
    const auto train = features::concat(parts);
    if (train.rows() == 0) fail("no training samples for " + where);

    FoldProblem p;
    p.position = position;
    p.fold = fold;
    p.scaler = features::ScalerParams::fit(train.values, train.target);
    p.X_train = p.scaler.transform(train.values);
    p.y_train = p.scaler.normalize_targets(train.target);
    p.X_valid = p.scaler.transform(held_out.values);
    p.y_valid = p.scaler.normalize_targets(held_out.target);
    auto w = weighting::fold_weights(p.y_train, p.y_valid, weighting.bins(position), weighting.clip_quantile);
    p.w_train = std::move(w.train);
    p.w_valid = std::move(w.valid);
    return p;
}

FittedModel train_candidate(const Candidate& c, const FoldProblem& p, std::uint64_t seed) {
    if (c.kind == ModelKind::random_forest)
        return trees::fit_random_forest(p.X_train, p.y_train, p.w_train, std::get<RfHyperparams>(c.hyperparams), seed);
    return trees::fit_gbdt(p.X_train, p.y_train, p.w_train, p.X_valid, p.y_valid, p.w_valid,
                           std::get<GbdtHyperparams>(c.hyperparams), seed);
}

double validation_rmse(const FittedModel& model, const FoldProblem& p) {
    return trees::weighted_rmse(trees::predict(model, p.X_valid), p.y_valid, p.w_valid);
}

Evaluated evaluate_candidate(const Candidate& c, const FoldProblem& p, std::uint64_t seed) {
    Evaluated e;
    e.model = train_candidate(c, p, seed);
    e.rmse = validation_rmse(*e.model, p);
    return e;
}

std::string_view to_string(StopRule rule) noexcept {
    return rule == StopRule::qualifying_count ? "qualifying_count" : "budget";
}

StopRule parse_stop_rule(std::string_view text) {
    if (text == "qualifying_count") return StopRule::qualifying_count;
    if (text == "budget") return StopRule::budget;
    throw Error(ErrorKind::config, "unknown stop rule '" + std::string(text) + "'");
}

std::vector<std::size_t> shuffled_order(std::size_t n, std::uint64_t seed, int fold) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(seed, 0x736561726368ULL + static_cast<std::uint64_t>(fold)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[trees::uniform_below(rng, i)]);
    return order;
}

SearchResult kbest_search(std::span<const Candidate> space, int fold, const SearchConfig& config,
                          const Evaluator& evaluate, std::span<const Evaluation> prior, const EvaluationSink& sink) {
    if (config.k < 1) throw Error(ErrorKind::config, "K must be at least 1");
    if (config.budget < config.k)
        throw Error(ErrorKind::config, "budget (" + std::to_string(config.budget) + ") must be at least K (" +
                                           std::to_string(config.k) + ")");
    if (space.empty()) throw Error(ErrorKind::config, "empty search space");
    const auto order = shuffled_order(space.size(), config.seed, fold);
    const std::size_t limit = std::min<std::size_t>(static_cast<std::size_t>(config.budget), space.size());
    const auto k = static_cast<std::size_t>(config.k);

    std::map<std::size_t, const Evaluation*> reuse;
    for (const auto& e : prior)
        if (e.fold == fold && e.order < order.size() && space[order[e.order]].index == e.candidate_index &&
            e.seed == config.seed)
            reuse[e.order] = &e;

    SearchResult result;
    result.fold = fold;
    result.threshold = std::numeric_limits<double>::infinity();
    const auto by_score = [](const Ranked& a, const Ranked& b) {
        return a.rmse < b.rmse || (a.rmse == b.rmse && a.candidate.index < b.candidate.index);
    };
    std::size_t qualifying = 0;
    bool done = false;
    const auto jobs = static_cast<std::size_t>(std::max(config.jobs, 1));

    for (std::size_t pos = 0; pos < limit && !done; pos += jobs) {
        const std::size_t end = std::min(pos + jobs, limit);
        struct Slot {
            Evaluated value;
            double seconds = 0.0;
            bool fresh = false;
        };
        std::vector<Slot> slots(end - pos);
        std::vector<std::future<void>> running;
        for (std::size_t i = pos; i < end; ++i) {
            auto& slot = slots[i - pos];
            if (auto it = reuse.find(i); it != reuse.end()) {
                slot.value.rmse = it->second->rmse;
                continue;
            }
            slot.fresh = true;
            const Candidate& c = space[order[i]];
            auto task = [&slot, &c, &evaluate, seed = config.seed] {
                const auto t0 = std::chrono::steady_clock::now();
                slot.value = evaluate(c, seed);
                slot.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            };
            if (jobs == 1) task();
            else running.push_back(std::async(std::launch::async, task));
        }
        for (auto& f : running) f.get();

        for (std::size_t i = pos; i < end && !done; ++i) {
            auto& slot = slots[i - pos];
            const Candidate& c = space[order[i]];
            Evaluation e{fold, i, c.index, c.encoding(), slot.value.rmse, config.seed};
            if (slot.fresh && sink) sink(e, slot.seconds);
            result.log.push_back(e);

            result.top.push_back({c, e.rmse, std::move(slot.value.model)});
            std::sort(result.top.begin(), result.top.end(), by_score);
            if (result.top.size() > k) result.top.pop_back();

            const std::size_t n = result.log.size();
            if (n == k) {
                for (const auto& l : result.log) result.threshold = std::min(result.threshold, l.rmse);
            } else if (n > k && e.rmse <= result.threshold) {
                ++qualifying;
            }
            if (n >= k) result.threshold_trace.push_back(result.threshold);
            if (config.stop == StopRule::qualifying_count && n > k && qualifying >= k) done = true;
        }
    }

    for (auto& r : result.top) {
        if (r.model) continue;
        auto again = evaluate(r.candidate, config.seed);
        if (std::abs(again.rmse - r.rmse) > 1e-12)
            throw Error(ErrorKind::internal, "re-evaluating " + r.candidate.encoding() + " gave RMSE " +
                                                 format_double(again.rmse) + ", log records " + format_double(r.rmse));
        r.model = std::move(again.model);
    }
    return result;
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kLogColumns{"fold", "order", "candidate_index", "encoding", "rmse", "seed"};

std::vector<std::string> log_row(const Evaluation& e) {
    return {dataset::fold_label(e.fold), std::to_string(e.order), std::to_string(e.candidate_index),
            e.encoding, format_double(e.rmse), std::to_string(e.seed)};
}

}  // namespace

std::vector<Evaluation> read_log(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {};
    const auto t = csv::Table::read(path);
    t.require_columns(kLogColumns);
    std::vector<Evaluation> out;
    for (std::size_t r = 0; r < t.size(); ++r) {
        Evaluation e;
        e.fold = dataset::parse_fold(t.cell(r, "fold"));
        e.order = static_cast<std::size_t>(t.get_int(r, "order"));
        e.candidate_index = static_cast<std::size_t>(t.get_int(r, "candidate_index"));
        e.encoding = t.cell(r, "encoding");
        e.rmse = t.get_double(r, "rmse");
        e.seed = std::stoull(t.cell(r, "seed"));
        out.push_back(std::move(e));
    }
    return out;
}

void write_log(const std::filesystem::path& path, std::span<const Evaluation> log) {
    csv::Table t(kLogColumns);
    for (const auto& e : log) t.add_row(log_row(e));
    t.write(path);
}

void append_log(const std::filesystem::path& path, const Evaluation& e) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw Error(ErrorKind::internal, "cannot append to " + path.string());
    const auto line = [](const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + csv::escape(cells[i]);
        return s + "\n";
    };
    if (fresh) out << line(kLogColumns);
    out << line(log_row(e));
    out.flush();
}

}  // namespace fplf::search
