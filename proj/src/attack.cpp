#include "pufatt/attack.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pufatt {

namespace {

// Seed streams fanned out from the experiment master seed.
constexpr std::uint64_t kInstanceStream = 1;
constexpr std::uint64_t kDataStream = 2;
constexpr std::uint64_t kNetStream = 3;
constexpr std::uint64_t kTrainStream = 4;
constexpr std::uint64_t kBiasStream = 5;
constexpr std::uint64_t kRunStreamBase = 0x1000;

bool is_feed_forward(const PufSpec& spec) {
    return std::holds_alternative<FeedForwardTopology>(spec.topology) ||
           std::holds_alternative<XorFeedForwardTopology>(spec.topology);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Human-facing sweep labels; six significant digits are plenty.
std::string format_label_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string format_fixed(double v, int decimals) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace

std::string attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::TwoHeadA: return "two_head_a";
        case AttackKind::TwoHeadB: return "two_head_b";
        case AttackKind::ThreeHead: return "three_head";
        case AttackKind::MultiClassA: return "multi_class_a";
        case AttackKind::MultiClassB: return "multi_class_b";
        case AttackKind::MultiClassC: return "multi_class_c";
        case AttackKind::CrpOnly: return "crp_only";
    }
    throw std::logic_error("attack_kind_name: unreachable");
}

AttackKind parse_attack_kind(const std::string& name) {
    if (name == "two_head_a") return AttackKind::TwoHeadA;
    if (name == "two_head_b") return AttackKind::TwoHeadB;
    if (name == "three_head") return AttackKind::ThreeHead;
    if (name == "multi_class_a") return AttackKind::MultiClassA;
    if (name == "multi_class_b") return AttackKind::MultiClassB;
    if (name == "multi_class_c") return AttackKind::MultiClassC;
    if (name == "crp_only") return AttackKind::CrpOnly;
    throw std::invalid_argument("unknown attack kind '" + name + "'");
}

bool attack_uses_power(AttackKind kind) {
    return kind == AttackKind::TwoHeadA || kind == AttackKind::ThreeHead ||
           kind == AttackKind::MultiClassA || kind == AttackKind::MultiClassC;
}

bool attack_uses_reliability(AttackKind kind) {
    return kind == AttackKind::TwoHeadB || kind == AttackKind::ThreeHead ||
           kind == AttackKind::MultiClassB || kind == AttackKind::MultiClassC;
}

bool attack_is_crossed(AttackKind kind) {
    return kind == AttackKind::MultiClassA || kind == AttackKind::MultiClassB ||
           kind == AttackKind::MultiClassC;
}

LossWeights preset_loss_weights(AttackKind kind, const PufSpec& spec) {
    LossWeights w;
    if (attack_is_crossed(kind) || kind == AttackKind::CrpOnly) return w;  // single label, weight 1

    const auto* xor_spec = std::get_if<XorTopology>(&spec.topology);
    const auto* oax_spec = std::get_if<OaxTopology>(&spec.topology);
    const auto* ip_spec = std::get_if<InterposeTopology>(&spec.topology);

    // Wide interpose layers need a flatter response/power ratio.
    const bool wide_interpose =
        ip_spec != nullptr && ((ip_spec->x == ip_spec->y && ip_spec->x >= 8) ||
                               (ip_spec->x == 2 && ip_spec->y >= 16));

    switch (kind) {
        case AttackKind::TwoHeadA:
            w.response = wide_interpose ? 2.0 : 10.0;
            w.power = wide_interpose ? 3.0 : 2.0;
            break;
        case AttackKind::TwoHeadB:
            if (is_feed_forward(spec)) {
                w.response = 10.0;
                w.reliability = 2.0;
            } else {
                w.response = 1.0;
                w.reliability = 0.8;
                if (xor_spec != nullptr && xor_spec->l == 10) w.reliability = 1.8;
                if (oax_spec != nullptr && oax_spec->x + oax_spec->y + oax_spec->z == 12)
                    w.reliability = 1.8;
            }
            break;
        case AttackKind::ThreeHead:
            w.response = wide_interpose ? 2.0 : 10.0;
            w.power = 2.0;
            w.reliability = 2.0;
            if (xor_spec != nullptr && xor_spec->l >= 29) w.reliability = 1.0;
            break;
        default: break;
    }
    return w;
}

std::vector<int> ExperimentConfig::effective_hidden() const {
    if (!hidden.empty()) return hidden;
    return {2 * puf.n, 2 * puf.n, 2 * puf.n};
}

void ExperimentConfig::validate() const {
    puf.validate();
    if (dataset_size < 6) throw std::invalid_argument("experiment: dataset size must be >= 6");
    if (!(sigma > 0.0)) throw std::invalid_argument("experiment: weight sigma must be > 0");
    if (noise.sigma < 0.0) throw std::invalid_argument("experiment: noise sigma must be >= 0");
    if (repeats < 1) throw std::invalid_argument("experiment: repeat count must be >= 1");
    if (!(success_threshold > 0.0 && success_threshold <= 1.0))
        throw std::invalid_argument("experiment: success threshold must lie in (0, 1]");
    if (attack_uses_power(kind) && !sci.use_power)
        throw std::invalid_argument("experiment: attack kind '" + attack_kind_name(kind) +
                                    "' requires use_power");
    if (attack_uses_reliability(kind)) {
        if (!sci.use_reliability)
            throw std::invalid_argument("experiment: attack kind '" + attack_kind_name(kind) +
                                        "' requires use_reliability");
        sci.validate();
    }
    if (!attack_is_crossed(kind)) {
        if (!(weights.response > 0.0))
            throw std::invalid_argument("experiment: response loss weight must be > 0");
        if (attack_uses_power(kind) && !(weights.power > 0.0))
            throw std::invalid_argument("experiment: power loss weight must be > 0");
        if (attack_uses_reliability(kind) && !(weights.reliability > 0.0))
            throw std::invalid_argument("experiment: reliability loss weight must be > 0");
    }
    if (vote_m < 1 || vote_m % 2 == 0)
        throw std::invalid_argument("experiment: vote_m must be odd");
    for (int width : effective_hidden())
        if (width < 1) throw std::invalid_argument("experiment: hidden widths must be >= 1");
    train.validate();
}

std::vector<int> attack_head_dims(AttackKind kind, int chain_count, int cn) {
    if (attack_is_crossed(kind))
        return {crossed_class_count(chain_count, cn, attack_uses_power(kind),
                                    attack_uses_reliability(kind))};
    std::vector<int> dims{2};  // binary response head counts as two classes
    if (attack_uses_power(kind)) dims.push_back(chain_count + 1);
    if (attack_uses_reliability(kind)) dims.push_back(cn);
    return dims;
}

int attack_output_dimensionality(AttackKind kind, int chain_count, int cn) {
    int sum = 0;
    for (int d : attack_head_dims(kind, chain_count, cn)) sum += d;
    return sum;
}

Dataset simulate_dataset(const ExperimentConfig& cfg, const std::string& response_mode) {
    cfg.validate();
    const PufInstance inst = instantiate(cfg.puf, cfg.mu, cfg.sigma, derive_seed(cfg.seed, kInstanceStream));

    SciConfig sci = cfg.sci;
    sci.use_power = sci.use_power || attack_uses_power(cfg.kind);
    sci.use_reliability = sci.use_reliability || attack_uses_reliability(cfg.kind);

    bool vote = false;
    if (response_mode == "majority_vote")
        vote = true;
    else if (response_mode == "auto")
        vote = is_feed_forward(cfg.puf) && sci.use_reliability && cfg.noise.sigma > 0.0;
    else if (response_mode != "noise_free")
        throw std::invalid_argument("simulate_dataset: unknown response mode '" + response_mode + "'");

    std::optional<MajorityVotePolicy> policy;
    if (vote) {
        const std::size_t s = cfg.dataset_size;
        policy = MajorityVotePolicy{cfg.vote_m, 4 * s / 6 + s / 6};  // train + validation prefix
    }
    return generate(inst, cfg.dataset_size, sci, cfg.noise, derive_seed(cfg.seed, kDataStream), policy);
}

namespace {

AttackReport run_attack_parts(const ExperimentConfig& cfg, SplitParts parts) {
    const bool uses_power = attack_uses_power(cfg.kind);
    const bool uses_rel = attack_uses_reliability(cfg.kind);
    const int chain_count = parts.train.meta.chain_count;
    const int cn = parts.train.meta.cn;

    EncodedBatch train_batch, val_batch, test_batch;
    std::vector<HeadSpec> heads;
    ResponseExtractor extractor;

    if (attack_is_crossed(cfg.kind)) {
        train_batch = encode_crossed(parts.train, uses_power, uses_rel);
        val_batch = encode_crossed(parts.validation, uses_power, uses_rel);
        test_batch = encode_crossed(parts.test, uses_power, uses_rel);
        const int classes = crossed_class_count(chain_count, cn, uses_power, uses_rel);
        heads.push_back(HeadSpec{HeadKind::Categorical, classes, 1.0});
        extractor = [chain_count, cn, uses_power, uses_rel](const HeadOutputs& outputs) {
            const Matrix& p = outputs.heads.at(0);
            std::vector<Bit> bits(static_cast<std::size_t>(p.rows));
            for (int r = 0; r < p.rows; ++r) {
                const double* row = p.row(r);
                int best = 0;
                for (int c = 1; c < p.cols; ++c)
                    if (row[c] > row[best]) best = c;
                bits[static_cast<std::size_t>(r)] =
                    response_from_crossed(best, chain_count, cn, uses_power, uses_rel);
            }
            return bits;
        };
    } else {
        train_batch = encode_multihead(parts.train, uses_power, uses_rel);
        val_batch = encode_multihead(parts.validation, uses_power, uses_rel);
        test_batch = encode_multihead(parts.test, uses_power, uses_rel);
        heads.push_back(HeadSpec{HeadKind::Binary, 1, cfg.weights.response});
        if (uses_power) heads.push_back(HeadSpec{HeadKind::Categorical, chain_count + 1, cfg.weights.power});
        if (uses_rel) heads.push_back(HeadSpec{HeadKind::Categorical, cn, cfg.weights.reliability});
    }

    NetConfig net_cfg;
    net_cfg.input_dim = parts.train.meta.n + 1;
    net_cfg.hidden = cfg.effective_hidden();
    net_cfg.activation = cfg.activation;
    net_cfg.heads = heads;

    MultiHeadNet net(net_cfg, derive_seed(cfg.seed, kNetStream));
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(cfg.seed, kTrainStream);

    const auto started = std::chrono::steady_clock::now();
    const TrainHistory history = train(net, train_batch, val_batch, train_cfg, extractor);
    const auto finished = std::chrono::steady_clock::now();

    const EvalResult val = evaluate(net, val_batch, extractor);
    const EvalResult test = evaluate(net, test_batch, extractor);

    AttackReport report;
    report.kind = attack_kind_name(cfg.kind);
    report.puf = parts.train.meta.puf;
    report.n = parts.train.meta.n;
    report.chain_count = chain_count;
    report.m = parts.train.meta.m;
    report.cn = cn;
    report.dataset_size =
        parts.train.records.size() + parts.validation.records.size() + parts.test.records.size();
    report.seed = cfg.seed;
    if (attack_is_crossed(cfg.kind)) {
        report.weights = LossWeights{1.0, 0.0, 0.0};
    } else {
        report.weights.response = cfg.weights.response;
        report.weights.power = uses_power ? cfg.weights.power : 0.0;
        report.weights.reliability = uses_rel ? cfg.weights.reliability : 0.0;
    }
    report.head_dims = attack_head_dims(cfg.kind, chain_count, cn);
    report.output_dimensionality = attack_output_dimensionality(cfg.kind, chain_count, cn);
    report.epochs = static_cast<int>(history.epochs.size());
    report.train_seconds = std::chrono::duration<double>(finished - started).count();
    report.val_acc_response = val.response_accuracy;
    if (!attack_is_crossed(cfg.kind)) {
        std::size_t idx = 1;
        if (uses_power) report.val_acc_power = val.acc_per_head.at(idx++);
        if (uses_rel) report.val_acc_reliability = val.acc_per_head.at(idx);
    }
    report.test_accuracy = test.response_accuracy;
    report.success = report.test_accuracy >= cfg.success_threshold;
    return report;
}

}  // namespace

AttackReport run_attack_on_dataset(const ExperimentConfig& cfg, Dataset ds) {
    cfg.validate();
    if (ds.meta.n != cfg.puf.n)
        throw std::invalid_argument("run_attack: dataset stage count " + std::to_string(ds.meta.n) +
                                    " does not match configured n " + std::to_string(cfg.puf.n));
    if (attack_uses_reliability(cfg.kind) && ds.meta.cn != cfg.sci.cn)
        throw std::invalid_argument("run_attack: dataset reliability class count does not match config");
    return run_attack_parts(cfg, split(std::move(ds)));
}

AttackReport run_attack_on(const ExperimentConfig& cfg, const PufInstance& inst) {
    cfg.validate();
    SciConfig sci = cfg.sci;
    sci.use_power = sci.use_power || attack_uses_power(cfg.kind);
    sci.use_reliability = sci.use_reliability || attack_uses_reliability(cfg.kind);

    std::optional<MajorityVotePolicy> policy;
    if (is_feed_forward(cfg.puf) && sci.use_reliability && cfg.noise.sigma > 0.0) {
        const std::size_t s = cfg.dataset_size;
        policy = MajorityVotePolicy{cfg.vote_m, 4 * s / 6 + s / 6};
    }
    Dataset ds =
        generate(inst, cfg.dataset_size, sci, cfg.noise, derive_seed(cfg.seed, kDataStream), policy);
    return run_attack_parts(cfg, split(std::move(ds)));
}

AttackReport run_attack(const ExperimentConfig& cfg) {
    cfg.validate();
    const PufInstance inst = instantiate(cfg.puf, cfg.mu, cfg.sigma, derive_seed(cfg.seed, kInstanceStream));
    return run_attack_on(cfg, inst);
}

double median_of(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median_of: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

RepeatSummary run_repeated(const ExperimentConfig& cfg, int repeats) {
    if (repeats < 1) throw std::invalid_argument("run_repeated: repeat count must be >= 1");
    RepeatSummary summary;
    std::vector<double> accuracies;
    int successes = 0;
    for (int run = 0; run < repeats; ++run) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.seed = derive_seed(cfg.seed, kRunStreamBase + static_cast<std::uint64_t>(run));
        AttackReport report = run_attack(run_cfg);
        accuracies.push_back(report.test_accuracy);
        successes += report.success ? 1 : 0;
        summary.runs.push_back(std::move(report));
    }
    summary.best_accuracy = *std::max_element(accuracies.begin(), accuracies.end());
    summary.median_accuracy = median_of(accuracies);
    summary.success_rate = static_cast<double>(successes) / repeats;
    return summary;
}

MinSizeResult sweep_min_training_size(const ExperimentConfig& cfg, const std::vector<std::size_t>& grid,
                                      int repeats, double min_fraction) {
    if (grid.empty()) throw std::invalid_argument("sweep_min_training_size: empty grid");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw std::invalid_argument("sweep_min_training_size: grid must be ascending");
    MinSizeResult result;
    for (std::size_t size : grid) {
        ExperimentConfig point = cfg;
        point.dataset_size = size;
        const RepeatSummary summary = run_repeated(point, repeats);
        result.rows.push_back(
            MinSizeRow{size, summary.best_accuracy, summary.median_accuracy, summary.success_rate});
        if (!result.minimal_size.has_value() && summary.success_rate >= min_fraction)
            result.minimal_size = size;
    }
    return result;
}

std::vector<AttackReport> sweep_loss_weights(const ExperimentConfig& cfg, const std::string& head,
                                             const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("sweep_loss_weights: empty grid");
    std::vector<AttackReport> reports;
    for (double weight : grid) {
        if (!(weight > 0.0)) throw std::invalid_argument("sweep_loss_weights: weights must be > 0");
        ExperimentConfig point = cfg;
        if (head == "response")
            point.weights.response = weight;
        else if (head == "power")
            point.weights.power = weight;
        else if (head == "reliability")
            point.weights.reliability = weight;
        else
            throw std::invalid_argument("sweep_loss_weights: unknown head '" + head + "'");
        AttackReport report = run_attack(point);
        report.label = "lambda_" + head + "=" + format_label_value(weight);
        reports.push_back(std::move(report));
    }
    return reports;
}

std::vector<AttackReport> sweep_reliability_granularity(const ExperimentConfig& cfg,
                                                        const std::vector<std::pair<int, int>>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("sweep_reliability_granularity: empty pair list");
    std::vector<AttackReport> reports;
    for (const auto& [m, cn] : pairs) {
        ExperimentConfig point = cfg;
        point.sci.m = m;
        point.sci.cn = cn;
        point.sci.validate();
        AttackReport report = run_attack(point);
        report.label = "m=" + std::to_string(m) + " cn=" + std::to_string(cn);
        reports.push_back(std::move(report));
    }
    return reports;
}

std::vector<AttackReport> sweep_uniformity(const ExperimentConfig& cfg, const std::vector<double>& targets) {
    if (targets.empty()) throw std::invalid_argument("sweep_uniformity: empty target list");
    cfg.validate();
    const PufInstance inst = instantiate(cfg.puf, cfg.mu, cfg.sigma, derive_seed(cfg.seed, kInstanceStream));
    std::vector<AttackReport> reports;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Rng bias_rng(derive_seed(cfg.seed, kBiasStream + i));
        const PufInstance biased = bias_instance(inst, targets[i], bias_rng);
        AttackReport report = run_attack_on(cfg, biased);
        report.label = "uniformity=" + format_label_value(targets[i]);
        reports.push_back(std::move(report));
    }
    return reports;
}

namespace {

const char* kCsvHeader =
    "kind,puf,n,L,m,cn,size,seed,lambda_response,lambda_power,lambda_reliability,head_dims,output_dim,"
    "epochs,train_seconds,val_acc_response,val_acc_power,val_acc_reliability,test_accuracy,success,label";

std::string head_dims_string(const std::vector<int>& dims) {
    std::string out;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i > 0) out += '+';
        out += std::to_string(dims[i]);
    }
    return out;
}

std::string optional_accuracy(double value) { return value < 0.0 ? "" : format_fixed(value, 4); }

}  // namespace

std::string format_reports(const std::vector<AttackReport>& reports, ReportFormat format) {
    std::ostringstream out;
    if (format == ReportFormat::Csv) {
        out << kCsvHeader << "\n";
        for (const auto& r : reports) {
            out << r.kind << ',' << r.puf << ',' << r.n << ',' << r.chain_count << ',' << r.m << ',' << r.cn
                << ',' << r.dataset_size << ',' << r.seed << ',' << format_double(r.weights.response) << ','
                << format_double(r.weights.power) << ',' << format_double(r.weights.reliability) << ','
                << head_dims_string(r.head_dims) << ',' << r.output_dimensionality << ',' << r.epochs << ','
                << format_fixed(r.train_seconds, 3) << ',' << optional_accuracy(r.val_acc_response) << ','
                << optional_accuracy(r.val_acc_power) << ',' << optional_accuracy(r.val_acc_reliability)
                << ',' << format_fixed(r.test_accuracy, 4) << ',' << (r.success ? 1 : 0) << ',' << r.label
                << "\n";
        }
        return out.str();
    }

    out << "attack        puf        n    L   dim   size      epochs  time(s)    accuracy  success\n";
    for (const auto& r : reports) {
        char line[256];
        std::snprintf(line, sizeof line, "%-13s %-10s %-4d %-3d %-5d %-9llu %-7d %-10.3f %6.2f%%  %s%s%s\n",
                      r.kind.c_str(), r.puf.c_str(), r.n, r.chain_count, r.output_dimensionality,
                      static_cast<unsigned long long>(r.dataset_size), r.epochs, r.train_seconds,
                      100.0 * r.test_accuracy, r.success ? "yes" : "no", r.label.empty() ? "" : "  ",
                      r.label.c_str());
        out << line;
    }
    return out.str();
}

void emit_report(const std::vector<AttackReport>& reports, const std::string& path, ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path);
    out << format_reports(reports, format);
    if (!out) throw std::runtime_error("emit_report: write failed for " + path);
}

std::vector<AttackReport> read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_report_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader)
        throw std::runtime_error(path + ": unrecognized report header");

    std::vector<AttackReport> reports;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        }
        if (fields.size() != 21)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 21 fields");
        try {
            AttackReport r;
            r.kind = fields[0];
            r.puf = fields[1];
            r.n = std::stoi(fields[2]);
            r.chain_count = std::stoi(fields[3]);
            r.m = std::stoi(fields[4]);
            r.cn = std::stoi(fields[5]);
            r.dataset_size = std::stoull(fields[6]);
            r.seed = std::stoull(fields[7]);
            r.weights.response = std::stod(fields[8]);
            r.weights.power = std::stod(fields[9]);
            r.weights.reliability = std::stod(fields[10]);
            std::istringstream dims(fields[11]);
            std::string dim;
            while (std::getline(dims, dim, '+')) r.head_dims.push_back(std::stoi(dim));
            r.output_dimensionality = std::stoi(fields[12]);
            r.epochs = std::stoi(fields[13]);
            r.train_seconds = std::stod(fields[14]);
            r.val_acc_response = fields[15].empty() ? -1.0 : std::stod(fields[15]);
            r.val_acc_power = fields[16].empty() ? -1.0 : std::stod(fields[16]);
            r.val_acc_reliability = fields[17].empty() ? -1.0 : std::stod(fields[17]);
            r.test_accuracy = std::stod(fields[18]);
            r.success = fields[19] == "1";
            r.label = fields[20];
            reports.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed report row");
        }
    }
    return reports;
}

std::string format_minsize(const MinSizeResult& result) {
    std::ostringstream out;
    out << "size,best_accuracy,median_accuracy,success_rate\n";
    for (const auto& row : result.rows)
        out << row.size << ',' << format_fixed(row.best_accuracy, 4) << ','
            << format_fixed(row.median_accuracy, 4) << ',' << format_fixed(row.success_rate, 4) << "\n";
    if (result.minimal_size.has_value())
        out << "# minimal_size=" << *result.minimal_size << "\n";
    else
        out << "# minimal_size=none\n";
    return out.str();
}

}  // namespace pufatt
