#include "pufatt/ro_synth.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "pufatt/rng.hpp"

namespace pufatt {

void RoFrequencyTable::insert(const Key& key, double freq_hz) {
    if (!(freq_hz > 0.0)) throw std::invalid_argument("ro table: frequency must be positive");
    if (!entries_.emplace(key, freq_hz).second)
        throw std::invalid_argument("ro table: duplicate measurement for device " + key.device + " ro " +
                                    std::to_string(key.ro) + " temp " + std::to_string(key.temp_c) + " rep " +
                                    std::to_string(key.rep));
}

double RoFrequencyTable::frequency(const Key& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
        throw std::out_of_range("ro table: missing measurement for device " + key.device + " ro " +
                                std::to_string(key.ro) + " temp " + std::to_string(key.temp_c) + " rep " +
                                std::to_string(key.rep));
    return it->second;
}

bool RoFrequencyTable::contains(const Key& key) const { return entries_.count(key) != 0; }

std::vector<int> RoFrequencyTable::oscillators(const std::string& device, int temp_c) const {
    std::set<int> found;
    for (const auto& [key, freq] : entries_)
        if (key.device == device && key.temp_c == temp_c) found.insert(key.ro);
    return {found.begin(), found.end()};
}

std::vector<int> RoFrequencyTable::repetitions(const std::string& device, int ro, int temp_c) const {
    std::set<int> found;
    for (const auto& [key, freq] : entries_)
        if (key.device == device && key.temp_c == temp_c && key.ro == ro) found.insert(key.rep);
    return {found.begin(), found.end()};
}

RoFrequencyTable load_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_table: cannot open " + path);

    RoFrequencyTable table;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != "device,ro,temp_c,rep,freq_hz")
                throw std::runtime_error(path + ":1: expected header device,ro,temp_c,rep,freq_hz");
            saw_header = true;
            continue;
        }
        std::istringstream row(line);
        std::string device, ro_s, temp_s, rep_s, freq_s;
        if (!std::getline(row, device, ',') || !std::getline(row, ro_s, ',') ||
            !std::getline(row, temp_s, ',') || !std::getline(row, rep_s, ',') || !std::getline(row, freq_s))
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 5 fields");
        RoFrequencyTable::Key key{device, 0, 0, 0};
        double freq = 0.0;
        try {
            key.ro = std::stoi(ro_s);
            key.temp_c = std::stoi(temp_s);
            key.rep = std::stoi(rep_s);
            freq = std::stod(freq_s);
        } catch (const std::logic_error&) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed row");
        }
        table.insert(key, freq);
    }
    if (!saw_header) throw std::runtime_error(path + ": empty file");
    return table;
}

std::vector<int> random_assignment(const RoFrequencyTable& table, const std::string& device, int temp_c,
                                   int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("random_assignment: stage count must be >= 1");
    std::vector<int> available = table.oscillators(device, temp_c);
    const std::size_t needed = 4 * static_cast<std::size_t>(n);
    if (available.size() < needed)
        throw std::invalid_argument("random_assignment: device " + device + " offers " +
                                    std::to_string(available.size()) + " oscillators, need " +
                                    std::to_string(needed));
    Rng rng(seed);
    for (std::size_t i = available.size(); i > 1; --i)
        std::swap(available[i - 1], available[rng.next_below(i)]);
    available.resize(needed);
    return available;
}

std::vector<StageDelays> stage_delays(const RoFrequencyTable& table, const std::string& device, int temp_c,
                                      int rep, const std::vector<int>& assignment) {
    if (assignment.empty() || assignment.size() % 4 != 0)
        throw std::invalid_argument("stage_delays: assignment must list 4 oscillators per stage");
    std::vector<StageDelays> stages(assignment.size() / 4);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        auto period = [&](std::size_t slot) {
            return 1.0 / table.frequency({device, assignment[4 * i + slot], temp_c, rep});
        };
        stages[i] = StageDelays{period(0), period(1), period(2), period(3)};
    }
    return stages;
}

std::vector<StageDelays> mean_stage_delays(const RoFrequencyTable& table, const std::string& device,
                                           int temp_c, const std::vector<int>& assignment) {
    if (assignment.empty() || assignment.size() % 4 != 0)
        throw std::invalid_argument("mean_stage_delays: assignment must list 4 oscillators per stage");
    std::vector<StageDelays> stages(assignment.size() / 4);
    for (std::size_t i = 0; i < stages.size(); ++i) {
        auto mean_period = [&](std::size_t slot) {
            const int ro = assignment[4 * i + slot];
            const std::vector<int> reps = table.repetitions(device, ro, temp_c);
            if (reps.empty())
                throw std::out_of_range("mean_stage_delays: no repetitions for ro " + std::to_string(ro));
            double mean_freq = 0.0;
            for (int rep : reps) mean_freq += table.frequency({device, ro, temp_c, rep});
            mean_freq /= static_cast<double>(reps.size());
            return 1.0 / mean_freq;
        };
        stages[i] = StageDelays{mean_period(0), mean_period(1), mean_period(2), mean_period(3)};
    }
    return stages;
}

ApufWeights weights_from_delays(const std::vector<StageDelays>& stages) {
    if (stages.empty()) throw std::invalid_argument("weights_from_delays: no stages");
    const std::size_t n = stages.size();
    ApufWeights w(n + 1);
    w[0] = (stages[0].uncross() - stages[0].cross()) / 2.0;
    for (std::size_t i = 1; i < n; ++i)
        w[i] = (stages[i - 1].uncross() + stages[i - 1].cross() + stages[i].uncross() - stages[i].cross()) /
               2.0;
    w[n] = (stages[n - 1].uncross() + stages[n - 1].cross()) / 2.0;
    return w;
}

ApufWeights synthesize_weights(const RoFrequencyTable& table, const std::string& device, int temp_c, int rep,
                               const std::vector<int>& assignment) {
    return weights_from_delays(stage_delays(table, device, temp_c, rep, assignment));
}

double path_delay_difference(const std::vector<StageDelays>& stages, const Challenge& c) {
    if (stages.size() != c.size())
        throw std::invalid_argument("path_delay_difference: stage/challenge length mismatch");
    double top = 0.0;
    double bottom = 0.0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        if (c[i] == 0) {
            top += stages[i].t13;
            bottom += stages[i].t24;
        } else {
            const double new_top = bottom + stages[i].t14;
            const double new_bottom = top + stages[i].t23;
            top = new_top;
            bottom = new_bottom;
        }
    }
    return top - bottom;
}

Bit reference_response(const RoFrequencyTable& table, const std::string& device, int ref_temp,
                       const std::vector<int>& assignment, const Challenge& c) {
    const ApufWeights w = weights_from_delays(mean_stage_delays(table, device, ref_temp, assignment));
    return respond(w, c);
}

int reliability_from_repeats(const RoFrequencyTable& table, const std::string& device, int ref_temp,
                             int meas_temp, const std::vector<int>& assignment, const Challenge& c, int m) {
    if (m < 1) throw std::invalid_argument("reliability_from_repeats: m must be >= 1");
    if (assignment.empty()) throw std::invalid_argument("reliability_from_repeats: empty assignment");

    // Anchors the comparison; throws when the reference data is missing.
    (void)reference_response(table, device, ref_temp, assignment, c);

    const std::vector<int> reps = table.repetitions(device, assignment[0], meas_temp);
    if (static_cast<int>(reps.size()) < m)
        throw std::out_of_range("reliability_from_repeats: only " + std::to_string(reps.size()) +
                                " repetitions at measurement temperature, need " + std::to_string(m));
    int ones = 0;
    for (int k = 0; k < m; ++k) {
        const ApufWeights w = synthesize_weights(table, device, meas_temp, reps[static_cast<std::size_t>(k)],
                                                 assignment);
        ones += respond(w, c);
    }
    return ones;
}

}  // namespace pufatt
