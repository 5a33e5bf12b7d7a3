#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pufatt/matrix.hpp"
#include "pufatt/sci.hpp"

namespace pufatt {

// Header fields persisted with a dataset. The noise spec is kept in memory
// for provenance but is not part of the file format.
struct DatasetMeta {
    std::string puf = "xor";  // topology kind name
    int n = 0;
    int chain_count = 1;  // L
    int m = 0;
    int cn = 0;
    std::uint64_t seed = 0;
    NoiseSpec noise{};

    bool operator==(const DatasetMeta& other) const {
        return puf == other.puf && n == other.n && chain_count == other.chain_count && m == other.m &&
               cn == other.cn && seed == other.seed;
    }
};

enum class SplitTag : std::uint8_t { None = 0, Train = 1, Validation = 2, Test = 3 };

struct Dataset {
    DatasetMeta meta;
    std::vector<SciRecord> records;
    std::vector<SplitTag> tags;  // parallel to records; filled by split()

    bool operator==(const Dataset& other) const {
        return meta == other.meta && records == other.records;
    }
};

// Majority voting applied to the response labels of the first
// `voted_prefix` records; `m` must be odd. Used for feed-forward targets
// where the raw response is too unstable to train on.
struct MajorityVotePolicy {
    int m = 11;
    std::size_t voted_prefix = 0;
};

// `size` records with uniformly random challenges. Responses are noise-free
// unless a vote policy covers the record; power and reliability labels
// follow `sci`. Record k consumes only the rng stream derived from
// (seed, k), so output is byte-identical for a given seed regardless of
// evaluation order.
Dataset generate(const PufInstance& inst, std::size_t size, const SciConfig& sci, const NoiseSpec& noise,
                 std::uint64_t seed, const std::optional<MajorityVotePolicy>& vote = std::nullopt);

// Parity features of the challenge as +-1 reals, length n+1.
std::vector<double> encode_challenge(const Challenge& c);

struct SplitParts {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// Contiguous 4:1:1 partition: floor(4s/6), floor(s/6), remainder. Requires
// at least 6 records; no record is duplicated or dropped.
SplitParts split(Dataset ds);

// Number of crossed classes: 2 * (L+1)^[power] * cn^[reliability].
int crossed_class_count(int chain_count, int cn, bool use_power, bool use_reliability);

// Single-label class index fusing response with the used side-channel
// labels; the response occupies the outermost block.
int feature_cross(const SciRecord& rec, int chain_count, int cn, bool use_power, bool use_reliability);

// Recovers the response bit from a crossed class index.
Bit response_from_crossed(int class_index, int chain_count, int cn, bool use_power, bool use_reliability);

// Text and packed binary serialization; write() and read() dispatch on the
// ".csv" extension.
void write_csv(const Dataset& ds, const std::string& path);
Dataset read_csv(const std::string& path);
void write_binary(const Dataset& ds, const std::string& path);
Dataset read_binary(const std::string& path);
void write(const Dataset& ds, const std::string& path);
Dataset read(const std::string& path);

// Inputs plus per-head targets, aligned row-for-row. `targets` holds one
// matrix per network head (binary heads use a single column). The ground
// truth response bit is kept separately for accuracy evaluation.
struct EncodedBatch {
    Matrix inputs;
    std::vector<Matrix> targets;
    std::vector<Bit> response_bits;
    std::vector<SplitTag> tags;

    int row_count() const { return inputs.rows; }
};

// Multi-head encoding: response column, then optional power one-hot
// (L+1 classes) and reliability one-hot (cn classes).
EncodedBatch encode_multihead(const Dataset& ds, bool use_power, bool use_reliability);

// Single-label encoding: one crossed one-hot target.
EncodedBatch encode_crossed(const Dataset& ds, bool use_power, bool use_reliability);

// Response-only encoding.
EncodedBatch encode_response_only(const Dataset& ds);

}  // namespace pufatt
