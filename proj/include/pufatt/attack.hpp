#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pufatt/dataset.hpp"
#include "pufatt/net.hpp"
#include "pufatt/puf.hpp"

namespace pufatt {

// Attack families: the multi-head variants train one output head per
// information source; the multi-class variants fuse everything into one
// crossed label; crp_only trains on responses alone.
enum class AttackKind {
    TwoHeadA,     // response + power heads
    TwoHeadB,     // response + reliability heads
    ThreeHead,    // response + power + reliability heads
    MultiClassA,  // crossed response x power
    MultiClassB,  // crossed response x reliability
    MultiClassC,  // crossed response x power x reliability
    CrpOnly
};

std::string attack_kind_name(AttackKind kind);
AttackKind parse_attack_kind(const std::string& name);
bool attack_uses_power(AttackKind kind);
bool attack_uses_reliability(AttackKind kind);
bool attack_is_crossed(AttackKind kind);

struct LossWeights {
    double response = 1.0;
    double power = 0.0;
    double reliability = 0.0;
};

// Empirically tuned per-family defaults, with the documented special cases
// for large XOR/OAX counts and wide interpose layers.
LossWeights preset_loss_weights(AttackKind kind, const PufSpec& spec);

struct ExperimentConfig {
    PufSpec puf;
    SciConfig sci;
    AttackKind kind = AttackKind::CrpOnly;
    LossWeights weights;
    std::size_t dataset_size = 10000;
    double mu = 0.0;
    double sigma = 1.0;
    NoiseSpec noise{0.0, 0.05};
    std::vector<int> hidden;  // empty: three hidden layers of width 2n
    Activation activation = Activation::Rectifier;
    TrainConfig train;
    int repeats = 1;
    double success_threshold = 0.90;
    std::uint64_t seed = 1;
    int vote_m = 11;  // majority-vote count for feed-forward response labels

    std::vector<int> effective_hidden() const;
    void validate() const;
};

struct AttackReport {
    std::string kind;
    std::string puf;
    int n = 0;
    int chain_count = 0;
    int m = 0;
    int cn = 0;
    std::uint64_t dataset_size = 0;
    std::uint64_t seed = 0;
    LossWeights weights;
    std::vector<int> head_dims;
    int output_dimensionality = 0;
    int epochs = 0;
    double train_seconds = 0.0;
    double val_acc_response = -1.0;
    double val_acc_power = -1.0;
    double val_acc_reliability = -1.0;
    double test_accuracy = 0.0;
    bool success = false;
    std::string label;  // sweep coordinate, empty for plain runs
};

// Per-head output sizes of the trained model; the binary response head
// counts as 2.
std::vector<int> attack_head_dims(AttackKind kind, int chain_count, int cn);
int attack_output_dimensionality(AttackKind kind, int chain_count, int cn);

// Full pipeline: instantiate, simulate, split 4:1:1, encode, train,
// evaluate on the held-out test split.
AttackReport run_attack(const ExperimentConfig& cfg);
AttackReport run_attack_on(const ExperimentConfig& cfg, const PufInstance& inst);
AttackReport run_attack_on_dataset(const ExperimentConfig& cfg, Dataset ds);

// The dataset run_attack would train on, for external storage.
Dataset simulate_dataset(const ExperimentConfig& cfg, const std::string& response_mode = "auto");

struct RepeatSummary {
    std::vector<AttackReport> runs;
    double best_accuracy = 0.0;
    double median_accuracy = 0.0;
    double success_rate = 0.0;
};

RepeatSummary run_repeated(const ExperimentConfig& cfg, int repeats);

struct MinSizeRow {
    std::size_t size = 0;
    double best_accuracy = 0.0;
    double median_accuracy = 0.0;
    double success_rate = 0.0;
};

struct MinSizeResult {
    std::vector<MinSizeRow> rows;
    std::optional<std::size_t> minimal_size;
};

// Evaluates run_repeated over an ascending size grid; the minimal size is
// the smallest whose success rate reaches `min_fraction`.
MinSizeResult sweep_min_training_size(const ExperimentConfig& cfg, const std::vector<std::size_t>& grid,
                                      int repeats, double min_fraction);

// One run per loss weight for the named head ("response", "power",
// "reliability"), all under the shared master seed.
std::vector<AttackReport> sweep_loss_weights(const ExperimentConfig& cfg, const std::string& head,
                                             const std::vector<double>& grid);

// One run per (m, cn) pair at a fixed training size.
std::vector<AttackReport> sweep_reliability_granularity(const ExperimentConfig& cfg,
                                                        const std::vector<std::pair<int, int>>& pairs);

// Biases the instance chains to each target uniformity, then attacks.
std::vector<AttackReport> sweep_uniformity(const ExperimentConfig& cfg, const std::vector<double>& targets);

enum class ReportFormat { Csv, Text };

std::string format_reports(const std::vector<AttackReport>& reports, ReportFormat format);
void emit_report(const std::vector<AttackReport>& reports, const std::string& path, ReportFormat format);
std::vector<AttackReport> read_report_csv(const std::string& path);

std::string format_minsize(const MinSizeResult& result);

double median_of(std::vector<double> values);

}  // namespace pufatt
