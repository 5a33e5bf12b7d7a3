#include "pufatt/config.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace pufatt {

namespace {

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) parts.push_back(trim(item));
    return parts;
}

struct Entry {
    std::string value;
    std::size_t line = 0;
};

class KeyValues {
public:
    KeyValues(std::map<std::string, Entry> entries, std::string origin)
        : entries_(std::move(entries)), origin_(std::move(origin)) {}

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::optional<std::string> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        std::string value = it->second.value;
        entries_.erase(it);
        return value;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        auto it = entries_.find(key);
        const std::string where =
            it == entries_.end() ? origin_ : origin_ + ":" + std::to_string(it->second.line);
        throw ConfigError(where + ": " + what);
    }

    void reject_leftovers() const {
        if (entries_.empty()) return;
        const auto& [key, entry] = *entries_.begin();
        throw ConfigError(origin_ + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
    }

    const std::string& origin() const { return origin_; }

private:
    std::map<std::string, Entry> entries_;
    std::string origin_;
};

KeyValues tokenize(const std::string& text, const std::string& origin) {
    std::map<std::string, Entry> entries;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (!entries.emplace(key, Entry{value, line_no}).second)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    return KeyValues(std::move(entries), origin);
}

template <typename Parser>
auto take_parsed(KeyValues& kv, const std::string& key, Parser parse)
    -> std::optional<decltype(parse(std::string{}))> {
    const auto raw = kv.take(key);
    if (!raw) return std::nullopt;
    try {
        return parse(*raw);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        kv.fail(key, "invalid value for '" + key + "': " + e.what());
    }
}

long long to_int(const std::string& s) {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected a boolean");
}

std::vector<FfLoop> parse_loops(const std::string& s) {
    std::vector<FfLoop> loops;
    for (const std::string& part : split_on(s, ';')) {
        if (part.empty()) continue;
        const std::size_t arrow = part.find('>');
        if (arrow == std::string::npos) throw std::invalid_argument("loop needs 'tap>dest[,dest...]'");
        FfLoop loop;
        loop.tap_stage = static_cast<int>(to_int(trim(part.substr(0, arrow))));
        for (const std::string& dest : split_on(part.substr(arrow + 1), ','))
            loop.dest_indices.push_back(static_cast<int>(to_int(dest)));
        loops.push_back(std::move(loop));
    }
    if (loops.empty()) throw std::invalid_argument("empty loop list");
    return loops;
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text, const std::string& origin) {
    KeyValues kv = tokenize(text, origin);
    ParsedConfig parsed;
    ExperimentConfig& cfg = parsed.experiment;

    // Topology fields are collected first, then assembled by kind.
    const auto puf_kind = kv.take("puf").value_or("xor");
    const auto n = take_parsed(kv, "n", to_int);
    const auto l = take_parsed(kv, "l", to_int);
    const auto x = take_parsed(kv, "x", to_int);
    const auto y = take_parsed(kv, "y", to_int);
    const auto z = take_parsed(kv, "z", to_int);
    const auto pos = take_parsed(kv, "pos", to_int);
    const auto loops = take_parsed(kv, "loops", parse_loops);

    cfg.puf.n = static_cast<int>(n.value_or(64));
    if (puf_kind == "apuf") {
        cfg.puf.topology = XorTopology{1};
    } else if (puf_kind == "xor") {
        cfg.puf.topology = XorTopology{static_cast<int>(l.value_or(1))};
    } else if (puf_kind == "oax") {
        cfg.puf.topology = OaxTopology{static_cast<int>(x.value_or(0)), static_cast<int>(y.value_or(0)),
                                       static_cast<int>(z.value_or(0))};
    } else if (puf_kind == "interpose" || puf_kind == "ipuf") {
        cfg.puf.topology = InterposeTopology{static_cast<int>(x.value_or(1)), static_cast<int>(y.value_or(1)),
                                             static_cast<int>(pos.value_or(-1))};
    } else if (puf_kind == "ff") {
        if (!loops) throw ConfigError(origin + ": puf=ff requires a 'loops' entry");
        cfg.puf.topology = FeedForwardTopology{*loops};
    } else if (puf_kind == "xor_ff") {
        if (!loops) throw ConfigError(origin + ": puf=xor_ff requires a 'loops' entry");
        cfg.puf.topology = XorFeedForwardTopology{static_cast<int>(l.value_or(1)), *loops};
    } else {
        throw ConfigError(origin + ": unknown puf kind '" + puf_kind + "'");
    }

    if (const auto kind = kv.take("attack")) cfg.kind = parse_attack_kind(*kind);

    if (const auto v = take_parsed(kv, "size", to_int)) cfg.dataset_size = static_cast<std::size_t>(*v);
    if (const auto v = take_parsed(kv, "m", to_int)) cfg.sci.m = static_cast<int>(*v);
    if (const auto v = take_parsed(kv, "cn", to_int)) cfg.sci.cn = static_cast<int>(*v);
    if (const auto v = take_parsed(kv, "noisy_power", to_bool)) cfg.sci.noisy_power = *v;
    cfg.sci.use_power = take_parsed(kv, "use_power", to_bool).value_or(attack_uses_power(cfg.kind));
    cfg.sci.use_reliability =
        take_parsed(kv, "use_reliability", to_bool).value_or(attack_uses_reliability(cfg.kind));

    if (const auto v = take_parsed(kv, "mu", to_double)) cfg.mu = *v;
    if (const auto v = take_parsed(kv, "sigma", to_double)) cfg.sigma = *v;
    if (const auto v = take_parsed(kv, "sigma_noise", to_double)) cfg.noise.sigma = *v;

    cfg.weights = preset_loss_weights(cfg.kind, cfg.puf);
    if (const auto v = take_parsed(kv, "lambda_response", to_double)) cfg.weights.response = *v;
    if (const auto v = take_parsed(kv, "lambda_power", to_double)) cfg.weights.power = *v;
    if (const auto v = take_parsed(kv, "lambda_reliability", to_double)) cfg.weights.reliability = *v;

    if (const auto v = kv.take("hidden")) {
        cfg.hidden.clear();
        for (const std::string& item : split_on(*v, ',')) cfg.hidden.push_back(static_cast<int>(to_int(item)));
    }
    if (const auto v = kv.take("activation")) cfg.activation = parse_activation(*v);
    if (const auto v = take_parsed(kv, "learning_rate", to_double)) cfg.train.learning_rate = *v;
    if (const auto v = take_parsed(kv, "batch_size", to_int)) cfg.train.batch_size = static_cast<int>(*v);
    if (const auto v = take_parsed(kv, "max_epochs", to_int)) cfg.train.max_epochs = static_cast<int>(*v);
    if (const auto v = take_parsed(kv, "patience", to_int)) cfg.train.patience = static_cast<int>(*v);
    if (const auto v = take_parsed(kv, "threads", to_int)) cfg.train.threads = static_cast<int>(*v);
    if (const auto v = take_parsed(kv, "seed", to_int)) cfg.seed = static_cast<std::uint64_t>(*v);
    if (const auto v = take_parsed(kv, "repeats", to_int)) cfg.repeats = static_cast<int>(*v);
    if (const auto v = take_parsed(kv, "threshold", to_double)) cfg.success_threshold = *v;
    if (const auto v = take_parsed(kv, "vote_m", to_int)) cfg.vote_m = static_cast<int>(*v);

    if (const auto v = kv.take("response_mode")) parsed.response_mode = *v;

    if (const auto v = kv.take("sizes"))
        for (const std::string& item : split_on(*v, ','))
            parsed.sweep.sizes.push_back(static_cast<std::size_t>(to_int(item)));
    if (const auto v = kv.take("weights"))
        for (const std::string& item : split_on(*v, ','))
            parsed.sweep.weight_grid.push_back(to_double(item));
    if (const auto v = kv.take("sweep_head")) parsed.sweep.sweep_head = *v;
    if (const auto v = kv.take("pairs")) {
        for (const std::string& item : split_on(*v, ',')) {
            const std::size_t colon = item.find(':');
            if (colon == std::string::npos)
                throw ConfigError(origin + ": 'pairs' entries must look like m:cn");
            parsed.sweep.granularity_pairs.emplace_back(static_cast<int>(to_int(trim(item.substr(0, colon)))),
                                                        static_cast<int>(to_int(trim(item.substr(colon + 1)))));
        }
    }
    if (const auto v = kv.take("targets"))
        for (const std::string& item : split_on(*v, ','))
            parsed.sweep.uniformity_targets.push_back(to_double(item));
    if (const auto v = take_parsed(kv, "min_success", to_double)) parsed.sweep.min_success_fraction = *v;

    kv.reject_leftovers();

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return parsed;
}

ParsedConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path);
}

}  // namespace pufatt
