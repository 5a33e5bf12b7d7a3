#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pufatt/config.hpp"
#include "pufatt/ro_synth.hpp"

namespace {

using namespace pufatt;

int cmd_simulate(const std::string& config_path, const std::string& out_path) {
    const ParsedConfig parsed = parse_config_file(config_path);
    const Dataset ds = simulate_dataset(parsed.experiment, parsed.response_mode);
    write(ds, out_path);
    std::cout << "wrote " << ds.records.size() << " records to " << out_path << "\n";
    return 0;
}

int cmd_attack(const std::string& config_path, const std::string& dataset_path,
               const std::string& report_path) {
    const ParsedConfig parsed = parse_config_file(config_path);
    const ExperimentConfig& cfg = parsed.experiment;

    std::vector<AttackReport> reports;
    if (cfg.repeats > 1 && dataset_path.empty()) {
        const RepeatSummary summary = run_repeated(cfg, cfg.repeats);
        reports = summary.runs;
        std::printf("best %.2f%%  median %.2f%%  success rate %.2f\n", 100.0 * summary.best_accuracy,
                    100.0 * summary.median_accuracy, summary.success_rate);
    } else if (!dataset_path.empty()) {
        reports.push_back(run_attack_on_dataset(cfg, read(dataset_path)));
    } else {
        reports.push_back(run_attack(cfg));
    }
    if (!report_path.empty()) emit_report(reports, report_path, ReportFormat::Csv);
    std::cout << format_reports(reports, ReportFormat::Text);
    return 0;
}

int cmd_sweep(const std::string& kind, const std::string& config_path, const std::string& report_path) {
    const ParsedConfig parsed = parse_config_file(config_path);
    const ExperimentConfig& cfg = parsed.experiment;
    const SweepSettings& sweep = parsed.sweep;

    if (kind == "minsize") {
        if (sweep.sizes.empty()) throw ConfigError(config_path + ": minsize sweep needs 'sizes'");
        const MinSizeResult result =
            sweep_min_training_size(cfg, sweep.sizes, cfg.repeats, sweep.min_success_fraction);
        const std::string text = format_minsize(result);
        if (!report_path.empty()) {
            std::ofstream out(report_path);
            if (!out) throw std::runtime_error("cannot open " + report_path);
            out << text;
        }
        std::cout << text;
        return 0;
    }

    std::vector<AttackReport> reports;
    if (kind == "lossweight") {
        if (sweep.weight_grid.empty()) throw ConfigError(config_path + ": lossweight sweep needs 'weights'");
        reports = sweep_loss_weights(cfg, sweep.sweep_head, sweep.weight_grid);
    } else if (kind == "granularity") {
        if (sweep.granularity_pairs.empty())
            throw ConfigError(config_path + ": granularity sweep needs 'pairs'");
        reports = sweep_reliability_granularity(cfg, sweep.granularity_pairs);
    } else if (kind == "uniformity") {
        if (sweep.uniformity_targets.empty())
            throw ConfigError(config_path + ": uniformity sweep needs 'targets'");
        reports = sweep_uniformity(cfg, sweep.uniformity_targets);
    } else {
        throw ConfigError("unknown sweep kind '" + kind + "'");
    }
    if (!report_path.empty()) emit_report(reports, report_path, ReportFormat::Csv);
    std::cout << format_reports(reports, ReportFormat::Text);
    return 0;
}

int cmd_ro_synth(const std::string& table_path, const std::string& device, int n, std::uint64_t seed,
                 const std::string& out_path, int l, int ref_temp, int meas_temp, int m, int cn,
                 std::size_t size) {
    const RoFrequencyTable table = load_table(table_path);

    // One seeded permutation sliced into disjoint per-chain blocks.
    const std::vector<int> pool = random_assignment(table, device, ref_temp, n * l, seed);

    // Chain weights are fixed per repetition, so synthesize them once.
    std::vector<ApufWeights> reference_chains;
    std::vector<std::vector<ApufWeights>> repeat_chains(static_cast<std::size_t>(m));
    for (int chain = 0; chain < l; ++chain) {
        const std::vector<int> assignment(pool.begin() + 4 * n * chain, pool.begin() + 4 * n * (chain + 1));
        reference_chains.push_back(weights_from_delays(mean_stage_delays(table, device, ref_temp, assignment)));

        const std::vector<int> reps = table.repetitions(device, assignment[0], meas_temp);
        if (static_cast<int>(reps.size()) < m)
            throw std::runtime_error("ro-synth: only " + std::to_string(reps.size()) +
                                     " repetitions at the measurement temperature, need " + std::to_string(m));
        for (int rep_idx = 0; rep_idx < m; ++rep_idx)
            repeat_chains[static_cast<std::size_t>(rep_idx)].push_back(
                synthesize_weights(table, device, meas_temp, reps[static_cast<std::size_t>(rep_idx)], assignment));
    }

    Dataset ds;
    ds.meta.puf = "xor";
    ds.meta.n = n;
    ds.meta.chain_count = l;
    ds.meta.m = m;
    ds.meta.cn = cn;
    ds.meta.seed = seed;
    ds.records.resize(size);

    std::size_t unstable = 0;
    for (std::size_t k = 0; k < size; ++k) {
        Rng rng(derive_seed(seed, 0x10000 + k));
        SciRecord& rec = ds.records[k];
        rec.challenge.resize(static_cast<std::size_t>(n));
        for (auto& bit : rec.challenge) bit = static_cast<Bit>(rng.next_bit());

        Bit response = 0;
        for (const auto& w : reference_chains) response ^= respond(w, rec.challenge);
        rec.response = response;

        int ones = 0;
        for (int rep_idx = 0; rep_idx < m; ++rep_idx) {
            Bit composite = 0;
            for (const auto& w : repeat_chains[static_cast<std::size_t>(rep_idx)])
                composite ^= respond(w, rec.challenge);
            ones += composite;
        }
        rec.rel_count = ones;
        rec.rel_class = bin_count(ones, m, cn);
        if (ones != 0 && ones != m) ++unstable;
    }

    write(ds, out_path);
    std::printf("wrote %zu records to %s (unreliability %.4f over %zu challenges, m=%d)\n", size,
                out_path.c_str(), static_cast<double>(unstable) / static_cast<double>(size), size, m);
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& format) {
    const std::vector<AttackReport> reports = read_report_csv(in_path);
    if (format == "csv")
        std::cout << format_reports(reports, ReportFormat::Csv);
    else if (format == "text")
        std::cout << format_reports(reports, ReportFormat::Text);
    else
        throw ConfigError("unknown report format '" + format + "'");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PUF modeling-attack workbench"};
    app.require_subcommand(1);

    std::string config_path, out_path, dataset_path, report_path, sweep_kind;
    std::string table_path, device, report_in, report_format = "text";
    int n = 128, l = 1, ref_temp = 25, meas_temp = 55, m = 10, cn = 11;
    std::uint64_t seed = 1;
    std::size_t size = 10000;

    auto* simulate = app.add_subcommand("simulate", "Generate a dataset from a config");
    simulate->add_option("--config", config_path, "experiment config file")->required();
    simulate->add_option("--out", out_path, "output dataset (.csv or binary)")->required();

    auto* attack = app.add_subcommand("attack", "Run one modeling attack");
    attack->add_option("--config", config_path, "experiment config file")->required();
    attack->add_option("--dataset", dataset_path, "attack a stored dataset instead of simulating");
    attack->add_option("--report", report_path, "write a CSV report here");

    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
    sweep->add_option("--kind", sweep_kind, "minsize|lossweight|granularity|uniformity")->required();
    sweep->add_option("--config", config_path, "experiment config file")->required();
    sweep->add_option("--report", report_path, "write the sweep table here");

    auto* ro = app.add_subcommand("ro-synth", "Synthesize a dataset from oscillator frequencies");
    ro->add_option("--table", table_path, "frequency CSV (device,ro,temp_c,rep,freq_hz)")->required();
    ro->add_option("--device", device, "device id")->required();
    ro->add_option("--n", n, "stage count");
    ro->add_option("--seed", seed, "assignment seed");
    ro->add_option("--out", out_path, "output dataset")->required();
    ro->add_option("--l", l, "number of synthesized chains (xor)");
    ro->add_option("--ref-temp", ref_temp, "reference temperature (deg C)");
    ro->add_option("--meas-temp", meas_temp, "measurement temperature (deg C)");
    ro->add_option("--m", m, "repeated measurements per challenge");
    ro->add_option("--cn", cn, "reliability class count");
    ro->add_option("--size", size, "number of challenges");

    auto* report = app.add_subcommand("report", "Reprint a stored report");
    report->add_option("--in", report_in, "report CSV")->required();
    report->add_option("--format", report_format, "csv|text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(config_path, out_path);
        if (attack->parsed()) return cmd_attack(config_path, dataset_path, report_path);
        if (sweep->parsed()) return cmd_sweep(sweep_kind, config_path, report_path);
        if (ro->parsed())
            return cmd_ro_synth(table_path, device, n, seed, out_path, l, ref_temp, meas_temp, m, cn, size);
        if (report->parsed()) return cmd_report(report_in, report_format);
    } catch (const pufatt::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
