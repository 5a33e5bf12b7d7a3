#include <doctest.h>

#include <stdexcept>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pufatt/attack.hpp"
#include "pufatt/config.hpp"

using namespace pufatt;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

// Small, fast experiment used wherever the test needs a full pipeline run.
ExperimentConfig tiny_experiment(AttackKind kind) {
    ExperimentConfig cfg;
    cfg.puf = PufSpec{16, XorTopology{2}};
    cfg.kind = kind;
    cfg.sci.use_power = attack_uses_power(kind);
    cfg.sci.use_reliability = attack_uses_reliability(kind);
    cfg.sci.m = 10;
    cfg.sci.cn = 11;
    cfg.weights = preset_loss_weights(kind, cfg.puf);
    cfg.dataset_size = 3000;
    cfg.hidden = {16, 16};
    cfg.activation = Activation::Tanh;
    cfg.train.batch_size = 100;
    cfg.train.max_epochs = 30;
    cfg.train.patience = 30;
    cfg.train.threads = 2;
    cfg.seed = 2024;
    return cfg;
}

}  // namespace

TEST_CASE("attack kinds parse and print consistently") {
    for (AttackKind kind : {AttackKind::TwoHeadA, AttackKind::TwoHeadB, AttackKind::ThreeHead,
                            AttackKind::MultiClassA, AttackKind::MultiClassB, AttackKind::MultiClassC,
                            AttackKind::CrpOnly})
        CHECK(parse_attack_kind(attack_kind_name(kind)) == kind);
    CHECK_THROWS_AS(parse_attack_kind("three_heads"), std::invalid_argument);
}

TEST_CASE("head dimensionalities follow the summed and crossed formulas") {
    CHECK(attack_head_dims(AttackKind::ThreeHead, 20, 11) == std::vector<int>{2, 21, 11});
    CHECK(attack_output_dimensionality(AttackKind::ThreeHead, 20, 11) == 34);
    CHECK(attack_output_dimensionality(AttackKind::MultiClassC, 20, 11) == 462);
    CHECK(attack_output_dimensionality(AttackKind::MultiClassC, 20, 20) == 840);
    CHECK(attack_output_dimensionality(AttackKind::TwoHeadA, 4, 11) == 7);
    CHECK(attack_output_dimensionality(AttackKind::TwoHeadB, 4, 11) == 13);
    CHECK(attack_output_dimensionality(AttackKind::CrpOnly, 4, 11) == 2);
    CHECK(attack_output_dimensionality(AttackKind::MultiClassA, 4, 11) == 10);
    CHECK(attack_output_dimensionality(AttackKind::MultiClassB, 4, 11) == 22);
}

TEST_CASE("loss-weight presets cover the documented special cases") {
    const PufSpec xor5{128, XorTopology{5}};
    const PufSpec xor10{128, XorTopology{10}};
    const PufSpec xor30{128, XorTopology{30}};
    const PufSpec oax12{128, OaxTopology{2, 2, 8}};
    const PufSpec ipuf88{128, InterposeTopology{8, 8, -1}};
    const PufSpec ff{128, FeedForwardTopology{{FfLoop{15, {80}}}}};

    CHECK(preset_loss_weights(AttackKind::TwoHeadA, xor5).response == 10.0);
    CHECK(preset_loss_weights(AttackKind::TwoHeadA, xor5).power == 2.0);
    CHECK(preset_loss_weights(AttackKind::TwoHeadB, xor5).reliability == 0.8);
    CHECK(preset_loss_weights(AttackKind::TwoHeadB, xor10).reliability == 1.8);
    CHECK(preset_loss_weights(AttackKind::ThreeHead, xor30).reliability == 1.0);
    CHECK(preset_loss_weights(AttackKind::ThreeHead, xor5).reliability == 2.0);
    CHECK(preset_loss_weights(AttackKind::TwoHeadB, oax12).reliability == 1.8);
    CHECK(preset_loss_weights(AttackKind::TwoHeadA, ipuf88).response == 2.0);
    CHECK(preset_loss_weights(AttackKind::TwoHeadA, ipuf88).power == 3.0);
    CHECK(preset_loss_weights(AttackKind::ThreeHead, ipuf88).response == 2.0);
    CHECK(preset_loss_weights(AttackKind::TwoHeadB, ff).response == 10.0);
    CHECK(preset_loss_weights(AttackKind::TwoHeadB, ff).reliability == 2.0);
}

TEST_CASE("experiment validation names inconsistent settings") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::ThreeHead);
    cfg.sci.use_power = false;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("use_power"), std::invalid_argument);

    cfg = tiny_experiment(AttackKind::TwoHeadB);
    cfg.sci.cn = 20;  // > m + 1
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_experiment(AttackKind::CrpOnly);
    cfg.success_threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

    cfg = tiny_experiment(AttackKind::TwoHeadA);
    cfg.weights.power = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("a tiny crp-only attack learns a 16-stage chain") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::CrpOnly);
    cfg.puf = PufSpec{16, XorTopology{1}};
    const AttackReport report = run_attack(cfg);
    CHECK(report.test_accuracy >= 0.95);
    CHECK(report.output_dimensionality == 2);
    CHECK(report.kind == "crp_only");
    CHECK(report.epochs <= 30);
    CHECK(report.success);
}

TEST_CASE("attacking a stored dataset reproduces the simulated run") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::TwoHeadA);
    const AttackReport direct = run_attack(cfg);
    const AttackReport from_data = run_attack_on_dataset(cfg, simulate_dataset(cfg));
    CHECK(direct.test_accuracy == from_data.test_accuracy);
    CHECK(direct.val_acc_response == from_data.val_acc_response);
    CHECK(direct.epochs == from_data.epochs);
}

TEST_CASE("multi-class runs recover responses through the crossed label") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::MultiClassA);
    cfg.puf = PufSpec{16, XorTopology{1}};
    const AttackReport report = run_attack(cfg);
    CHECK(report.output_dimensionality == 4);  // 2 * (L+1) with one chain
    CHECK(report.test_accuracy >= 0.9);
}

TEST_CASE("repeated runs summarize accuracy and success") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::CrpOnly);
    cfg.puf = PufSpec{16, XorTopology{1}};
    cfg.dataset_size = 1500;
    cfg.train.max_epochs = 8;
    cfg.train.patience = 8;
    const RepeatSummary once = run_repeated(cfg, 1);
    CHECK(once.runs.size() == 1);
    CHECK(once.best_accuracy == once.runs[0].test_accuracy);
    CHECK(once.median_accuracy == once.runs[0].test_accuracy);
    CHECK((once.success_rate == 0.0 || once.success_rate == 1.0));

    const RepeatSummary again = run_repeated(cfg, 1);
    CHECK(again.best_accuracy == once.best_accuracy);
}

TEST_CASE("median handles even and odd counts") {
    CHECK(median_of({0.4}) == 0.4);
    CHECK(median_of({0.9, 0.1, 0.5}) == 0.5);
    CHECK(median_of({0.1, 0.2, 0.4, 0.8}) == doctest::Approx(0.3));
    CHECK_THROWS_AS(median_of({}), std::invalid_argument);
}

TEST_CASE("minimal-size sweeps demand ascending grids and report misses") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::CrpOnly);
    cfg.puf = PufSpec{16, XorTopology{2}};
    cfg.dataset_size = 600;
    cfg.train.max_epochs = 2;
    cfg.train.patience = 2;

    CHECK_THROWS_AS(sweep_min_training_size(cfg, {100, 50}, 1, 0.6), std::invalid_argument);
    CHECK_THROWS_AS(sweep_min_training_size(cfg, {}, 1, 0.6), std::invalid_argument);

    // Two epochs on a few hundred records cannot break a 2-xor композite.
    const MinSizeResult result = sweep_min_training_size(cfg, {60, 120}, 1, 0.6);
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].size == 60);
    CHECK(result.rows[1].size == 120);
    CHECK_FALSE(result.minimal_size.has_value());
    CHECK(format_minsize(result).find("minimal_size=none") != std::string::npos);
}

TEST_CASE("loss-weight sweeps preserve order and determinism") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::TwoHeadB);
    cfg.dataset_size = 1200;
    cfg.train.max_epochs = 3;
    cfg.train.patience = 3;
    const std::vector<double> grid{0.5, 1.0, 2.0};
    const auto reports = sweep_loss_weights(cfg, "reliability", grid);
    REQUIRE(reports.size() == 3);
    const std::vector<std::string> labels{"lambda_reliability=0.5", "lambda_reliability=1",
                                          "lambda_reliability=2"};
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(reports[i].label == labels[i]);
        CHECK(reports[i].weights.reliability == grid[i]);
    }
    const auto rerun = sweep_loss_weights(cfg, "reliability", {0.5});
    CHECK(rerun[0].test_accuracy == reports[0].test_accuracy);

    const auto single = sweep_loss_weights(cfg, "reliability", {1.5});
    CHECK(single.size() == 1);
    CHECK_THROWS_AS(sweep_loss_weights(cfg, "color", {1.0}), std::invalid_argument);
}

TEST_CASE("granularity sweeps validate the class bound") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::TwoHeadB);
    cfg.dataset_size = 1200;
    cfg.train.max_epochs = 2;
    cfg.train.patience = 2;
    const auto reports = sweep_reliability_granularity(cfg, {{10, 11}, {20, 21}});
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].m == 10);
    CHECK(reports[0].cn == 11);
    CHECK(reports[1].m == 20);
    CHECK(reports[1].cn == 21);
    CHECK_THROWS_AS(sweep_reliability_granularity(cfg, {{10, 12}}), std::invalid_argument);
}

TEST_CASE("uniformity sweeps run one row per target") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::CrpOnly);
    cfg.puf = PufSpec{16, XorTopology{1}};
    cfg.dataset_size = 900;
    cfg.train.max_epochs = 3;
    cfg.train.patience = 3;
    const auto reports = sweep_uniformity(cfg, {0.5, 0.7});
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].label == "uniformity=0.5");
    CHECK(reports[1].label == "uniformity=0.7");
    const auto rerun = sweep_uniformity(cfg, {0.5, 0.7});
    CHECK(rerun[0].test_accuracy == reports[0].test_accuracy);
    CHECK(rerun[1].test_accuracy == reports[1].test_accuracy);
}

TEST_CASE("report csv round-trips byte for byte") {
    ExperimentConfig cfg = tiny_experiment(AttackKind::TwoHeadA);
    cfg.dataset_size = 1200;
    cfg.train.max_epochs = 2;
    cfg.train.patience = 2;
    std::vector<AttackReport> reports{run_attack(cfg)};
    reports[0].label = "smoke";

    TempFile file("pufatt_test_report.csv");
    emit_report(reports, file.path, ReportFormat::Csv);
    const std::vector<AttackReport> parsed = read_report_csv(file.path);
    TempFile second("pufatt_test_report2.csv");
    emit_report(parsed, second.path, ReportFormat::Csv);

    std::ifstream a(file.path), b(second.path);
    const std::string text_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string text_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(text_a == text_b);
    CHECK(text_a.find("two_head_a") != std::string::npos);
}

TEST_CASE("empty report lists emit a header-only file") {
    TempFile file("pufatt_test_report_empty.csv");
    emit_report({}, file.path, ReportFormat::Csv);
    std::ifstream in(file.path);
    std::string line;
    CHECK(std::getline(in, line));
    CHECK(line.rfind("kind,", 0) == 0);
    CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("text reports render percentages at table precision") {
    AttackReport report;
    report.kind = "crp_only";
    report.puf = "xor";
    report.n = 64;
    report.chain_count = 1;
    report.dataset_size = 10000;
    report.output_dimensionality = 2;
    report.test_accuracy = 0.96974;
    const std::string text = format_reports({report}, ReportFormat::Text);
    CHECK(text.find("96.97%") != std::string::npos);
}

TEST_CASE("config files parse into validated experiments") {
    TempFile file("pufatt_test_config.conf");
    {
        std::ofstream out(file.path);
        out << "# smoke config\n";
        out << "puf = oax\n";
        out << "n = 32\n";
        out << "x = 2\ny = 2\nz = 3\n";
        out << "attack = three_head\n";
        out << "size = 3000\n";
        out << "m = 10\ncn = 11\n";
        out << "hidden = 32,32\n";
        out << "seed = 9\n";
    }
    const ParsedConfig parsed = parse_config_file(file.path);
    CHECK(parsed.experiment.puf.kind_name() == "oax");
    CHECK(parsed.experiment.puf.chain_count() == 7);
    CHECK(parsed.experiment.kind == AttackKind::ThreeHead);
    CHECK(parsed.experiment.sci.use_power);
    CHECK(parsed.experiment.sci.use_reliability);
    CHECK(parsed.experiment.weights.response == 10.0);   // preset applied
    CHECK(parsed.experiment.weights.reliability == 2.0);
    CHECK(parsed.experiment.hidden == std::vector<int>{32, 32});
}

TEST_CASE("unknown configuration keys are fatal") {
    TempFile file("pufatt_test_config_bad.conf");
    {
        std::ofstream out(file.path);
        out << "puf = xor\nl = 2\nn = 16\nattacker = crp_only\n";
    }
    CHECK_THROWS_WITH_AS(parse_config_file(file.path), doctest::Contains("attacker"), ConfigError);
}

TEST_CASE("loop syntax parses into fan-out loops") {
    TempFile file("pufatt_test_config_ff.conf");
    {
        std::ofstream out(file.path);
        out << "puf = xor_ff\nl = 2\nn = 128\nloops = 15>80,85;63>90\n";
        out << "attack = two_head_b\nsize = 600\n";
    }
    const ParsedConfig parsed = parse_config_file(file.path);
    const auto& topology = std::get<XorFeedForwardTopology>(parsed.experiment.puf.topology);
    REQUIRE(topology.loops.size() == 2);
    CHECK(topology.loops[0].tap_stage == 15);
    CHECK(topology.loops[0].dest_indices == std::vector<int>{80, 85});
    CHECK(topology.loops[1].tap_stage == 63);
    CHECK(topology.loops[1].dest_indices == std::vector<int>{90});
}

TEST_CASE("feed-forward reliability runs vote only the leading records") {
    ExperimentConfig cfg;
    cfg.puf = PufSpec{16, FeedForwardTopology{{FfLoop{4, {10}}}}};
    cfg.kind = AttackKind::TwoHeadB;
    cfg.sci.use_reliability = true;
    cfg.sci.m = 10;
    cfg.sci.cn = 11;
    cfg.weights = preset_loss_weights(cfg.kind, cfg.puf);
    cfg.dataset_size = 1200;
    cfg.vote_m = 11;
    cfg.hidden = {16};
    cfg.train.max_epochs = 2;
    cfg.train.patience = 2;
    cfg.seed = 77;

    const Dataset voted = simulate_dataset(cfg, "auto");
    const Dataset plain = simulate_dataset(cfg, "noise_free");
    bool differs = false;
    for (std::size_t k = 0; k < 1000; ++k)
        if (voted.records[k].response != plain.records[k].response) differs = true;
    CHECK(differs);  // voting flips some unstable training labels
    for (std::size_t k = 1000; k < 1200; ++k)
        CHECK(voted.records[k].response == plain.records[k].response);
}
