#include "pufatt/dataset.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pufatt {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

char hex_digit(unsigned v) { return v < 10 ? static_cast<char>('0' + v) : static_cast<char>('a' + v - 10); }

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Stage 0 maps to the most significant bit of the leading hex digit.
std::string challenge_to_hex(const Challenge& c) {
    std::string out;
    out.reserve((c.size() + 3) / 4);
    for (std::size_t i = 0; i < c.size(); i += 4) {
        unsigned nibble = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            nibble <<= 1;
            if (i + j < c.size()) nibble |= c[i + j];
        }
        out.push_back(hex_digit(nibble));
    }
    return out;
}

Challenge challenge_from_hex(const std::string& hex, int n, const std::string& path, std::size_t line) {
    if (static_cast<int>(hex.size()) != (n + 3) / 4) parse_fail(path, line, "challenge hex length mismatch");
    Challenge c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int digit = hex_value(hex[static_cast<std::size_t>(i / 4)]);
        if (digit < 0) parse_fail(path, line, "invalid hex digit in challenge");
        c[static_cast<std::size_t>(i)] = static_cast<Bit>((digit >> (3 - i % 4)) & 1);
    }
    return c;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    std::array<unsigned char, 4> b{static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                   static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error(path + ": truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
    const std::uint64_t lo = read_u32(in, path);
    const std::uint64_t hi = read_u32(in, path);
    return lo | (hi << 32);
}

}  // namespace

Dataset generate(const PufInstance& inst, std::size_t size, const SciConfig& sci, const NoiseSpec& noise,
                 std::uint64_t seed, const std::optional<MajorityVotePolicy>& vote) {
    if (size < 1) throw std::invalid_argument("generate: size must be >= 1");
    if (sci.use_reliability) sci.validate();
    if (vote && (vote->m < 1 || vote->m % 2 == 0))
        throw std::invalid_argument("generate: majority vote count must be odd");

    Dataset ds;
    ds.meta.puf = inst.spec.kind_name();
    ds.meta.n = inst.spec.n;
    ds.meta.chain_count = inst.spec.chain_count();
    ds.meta.m = sci.m;
    ds.meta.cn = sci.cn;
    ds.meta.seed = seed;
    ds.meta.noise = noise;
    ds.records.resize(size);

    const std::size_t n = static_cast<std::size_t>(inst.spec.n);
    for (std::size_t k = 0; k < size; ++k) {
        Rng rng(derive_seed(seed, k));
        SciRecord& rec = ds.records[k];
        rec.challenge.resize(n);
        for (auto& bit : rec.challenge) bit = static_cast<Bit>(rng.next_bit());

        const std::vector<Bit> bits = component_responses(inst, rec.challenge);
        rec.response = combine_components(inst.spec, bits);
        if (vote && k < vote->voted_prefix)
            rec.response = majority_vote_response(inst, rec.challenge, vote->m, noise, rng);

        if (sci.use_power) {
            if (sci.noisy_power) {
                const std::vector<Bit> noisy_bits = component_responses(inst, rec.challenge, noise, rng);
                rec.power = power_label(noisy_bits);
            } else {
                rec.power = power_label(bits);
            }
        }
        if (sci.use_reliability) {
            rec.rel_count = measure_reliability(inst, rec.challenge, sci.m, noise, rng);
            rec.rel_class = bin_count(rec.rel_count, sci.m, sci.cn);
        }
    }
    return ds;
}

std::vector<double> encode_challenge(const Challenge& c) { return parity_vector(c); }

SplitParts split(Dataset ds) {
    const std::size_t s = ds.records.size();
    if (s < 6) throw std::invalid_argument("split: need at least 6 records");
    const std::size_t train_size = 4 * s / 6;
    const std::size_t val_size = s / 6;

    SplitParts parts;
    parts.train.meta = ds.meta;
    parts.validation.meta = ds.meta;
    parts.test.meta = ds.meta;

    auto begin = std::make_move_iterator(ds.records.begin());
    parts.train.records.assign(begin, begin + static_cast<std::ptrdiff_t>(train_size));
    parts.validation.records.assign(begin + static_cast<std::ptrdiff_t>(train_size),
                                    begin + static_cast<std::ptrdiff_t>(train_size + val_size));
    parts.test.records.assign(begin + static_cast<std::ptrdiff_t>(train_size + val_size),
                              begin + static_cast<std::ptrdiff_t>(s));

    parts.train.tags.assign(parts.train.records.size(), SplitTag::Train);
    parts.validation.tags.assign(parts.validation.records.size(), SplitTag::Validation);
    parts.test.tags.assign(parts.test.records.size(), SplitTag::Test);
    return parts;
}

int crossed_class_count(int chain_count, int cn, bool use_power, bool use_reliability) {
    if (!use_power && !use_reliability)
        throw std::invalid_argument("crossed_class_count: crossing needs at least one side channel");
    int count = 2;
    if (use_power) count *= chain_count + 1;
    if (use_reliability) count *= cn;
    return count;
}

int feature_cross(const SciRecord& rec, int chain_count, int cn, bool use_power, bool use_reliability) {
    if (use_power && rec.power < 0) throw std::invalid_argument("feature_cross: power label missing");
    if (use_reliability && rec.rel_class < 0)
        throw std::invalid_argument("feature_cross: reliability label missing");
    int index = rec.response;
    if (use_power) index = index * (chain_count + 1) + rec.power;
    if (use_reliability) index = index * cn + rec.rel_class;
    return index;
}

Bit response_from_crossed(int class_index, int chain_count, int cn, bool use_power, bool use_reliability) {
    const int total = crossed_class_count(chain_count, cn, use_power, use_reliability);
    if (class_index < 0 || class_index >= total)
        throw std::invalid_argument("response_from_crossed: class index out of range");
    return static_cast<Bit>(class_index / (total / 2));
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    out << "# puf=" << ds.meta.puf << " n=" << ds.meta.n << " L=" << ds.meta.chain_count
        << " m=" << ds.meta.m << " cn=" << ds.meta.cn << " seed=" << ds.meta.seed << "\n";
    for (const auto& rec : ds.records) {
        out << challenge_to_hex(rec.challenge) << ',' << static_cast<int>(rec.response) << ',';
        if (rec.power >= 0) out << rec.power;
        out << ',';
        if (rec.rel_count >= 0) out << rec.rel_count;
        out << ',';
        if (rec.rel_class >= 0) out << rec.rel_class;
        out << '\n';
    }
    if (!out) throw std::runtime_error("write_csv: write failed for " + path);
}

Dataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) parse_fail(path, 1, "missing header");
    Dataset ds;
    {
        std::istringstream hs(line);
        std::string hash;
        hs >> hash;
        if (hash != "#") parse_fail(path, 1, "header must start with '#'");
        std::string field;
        bool saw_n = false;
        while (hs >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) parse_fail(path, 1, "malformed header field '" + field + "'");
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            try {
                if (key == "puf")
                    ds.meta.puf = value;
                else if (key == "n") {
                    ds.meta.n = std::stoi(value);
                    saw_n = true;
                } else if (key == "L")
                    ds.meta.chain_count = std::stoi(value);
                else if (key == "m")
                    ds.meta.m = std::stoi(value);
                else if (key == "cn")
                    ds.meta.cn = std::stoi(value);
                else if (key == "seed")
                    ds.meta.seed = std::stoull(value);
                else
                    parse_fail(path, 1, "unknown header key '" + key + "'");
            } catch (const std::logic_error&) {
                parse_fail(path, 1, "invalid value for header key '" + key + "'");
            }
        }
        if (!saw_n || ds.meta.n < 1) parse_fail(path, 1, "header must declare a positive n");
    }

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::array<std::string, 5> fields;
        std::size_t field_idx = 0;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (field_idx >= fields.size()) parse_fail(path, line_no, "too many fields");
                fields[field_idx++] = line.substr(start, i - start);
                start = i + 1;
            }
        }
        if (field_idx != fields.size()) parse_fail(path, line_no, "expected 5 fields");

        SciRecord rec;
        rec.challenge = challenge_from_hex(fields[0], ds.meta.n, path, line_no);
        if (fields[1] != "0" && fields[1] != "1") parse_fail(path, line_no, "response must be 0 or 1");
        rec.response = static_cast<Bit>(fields[1] == "1");
        try {
            if (!fields[2].empty()) rec.power = std::stoi(fields[2]);
            if (!fields[3].empty()) rec.rel_count = std::stoi(fields[3]);
            if (!fields[4].empty()) rec.rel_class = std::stoi(fields[4]);
        } catch (const std::logic_error&) {
            parse_fail(path, line_no, "invalid numeric label");
        }
        if (!fields[2].empty() && rec.power < 0) parse_fail(path, line_no, "negative power label");
        if (!fields[3].empty() && rec.rel_count < 0) parse_fail(path, line_no, "negative reliability count");
        if (!fields[4].empty() && rec.rel_class < 0) parse_fail(path, line_no, "negative reliability class");
        if (rec.power > ds.meta.chain_count) parse_fail(path, line_no, "power label exceeds chain count");
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void write_binary(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_binary: cannot open " + path);
    out.write("PUFD1", 5);
    std::uint8_t kind_len = static_cast<std::uint8_t>(ds.meta.puf.size());
    out.write(reinterpret_cast<const char*>(&kind_len), 1);
    out.write(ds.meta.puf.data(), kind_len);
    write_u32(out, static_cast<std::uint32_t>(ds.meta.n));
    write_u32(out, static_cast<std::uint32_t>(ds.meta.chain_count));
    write_u32(out, static_cast<std::uint32_t>(ds.meta.m));
    write_u32(out, static_cast<std::uint32_t>(ds.meta.cn));
    write_u64(out, ds.meta.seed);
    write_u64(out, ds.records.size());

    const std::size_t packed = (static_cast<std::size_t>(ds.meta.n) + 7) / 8;
    std::vector<unsigned char> buf(packed);
    for (const auto& rec : ds.records) {
        if (rec.power > 254 || rec.rel_count > 254 || rec.rel_class > 254)
            throw std::runtime_error("write_binary: label exceeds the one-byte range");
        std::fill(buf.begin(), buf.end(), 0);
        for (std::size_t i = 0; i < rec.challenge.size(); ++i)
            if (rec.challenge[i]) buf[i / 8] |= static_cast<unsigned char>(1u << (i % 8));
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(packed));
        const std::array<unsigned char, 4> labels{
            rec.response, static_cast<unsigned char>(rec.power < 0 ? 0xFF : rec.power),
            static_cast<unsigned char>(rec.rel_count < 0 ? 0xFF : rec.rel_count),
            static_cast<unsigned char>(rec.rel_class < 0 ? 0xFF : rec.rel_class)};
        out.write(reinterpret_cast<const char*>(labels.data()), 4);
    }
    if (!out) throw std::runtime_error("write_binary: write failed for " + path);
}

Dataset read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_binary: cannot open " + path);
    std::array<char, 5> magic{};
    if (!in.read(magic.data(), 5) || std::memcmp(magic.data(), "PUFD1", 5) != 0)
        throw std::runtime_error(path + ": not a PUFD1 dataset");

    Dataset ds;
    std::uint8_t kind_len = 0;
    if (!in.read(reinterpret_cast<char*>(&kind_len), 1)) throw std::runtime_error(path + ": truncated file");
    ds.meta.puf.resize(kind_len);
    if (!in.read(ds.meta.puf.data(), kind_len)) throw std::runtime_error(path + ": truncated file");
    ds.meta.n = static_cast<int>(read_u32(in, path));
    ds.meta.chain_count = static_cast<int>(read_u32(in, path));
    ds.meta.m = static_cast<int>(read_u32(in, path));
    ds.meta.cn = static_cast<int>(read_u32(in, path));
    ds.meta.seed = read_u64(in, path);
    const std::uint64_t count = read_u64(in, path);
    if (ds.meta.n < 1) throw std::runtime_error(path + ": invalid stage count");

    const std::size_t packed = (static_cast<std::size_t>(ds.meta.n) + 7) / 8;
    std::vector<unsigned char> buf(packed);
    ds.records.resize(count);
    for (auto& rec : ds.records) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(packed)))
            throw std::runtime_error(path + ": truncated file");
        rec.challenge.resize(static_cast<std::size_t>(ds.meta.n));
        for (std::size_t i = 0; i < rec.challenge.size(); ++i)
            rec.challenge[i] = static_cast<Bit>((buf[i / 8] >> (i % 8)) & 1);
        std::array<unsigned char, 4> labels{};
        if (!in.read(reinterpret_cast<char*>(labels.data()), 4))
            throw std::runtime_error(path + ": truncated file");
        rec.response = static_cast<Bit>(labels[0]);
        rec.power = labels[1] == 0xFF ? -1 : labels[1];
        rec.rel_count = labels[2] == 0xFF ? -1 : labels[2];
        rec.rel_class = labels[3] == 0xFF ? -1 : labels[3];
    }
    return ds;
}

namespace {
bool has_csv_extension(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}
}  // namespace

void write(const Dataset& ds, const std::string& path) {
    if (has_csv_extension(path))
        write_csv(ds, path);
    else
        write_binary(ds, path);
}

Dataset read(const std::string& path) {
    return has_csv_extension(path) ? read_csv(path) : read_binary(path);
}

namespace {

EncodedBatch encode_common(const Dataset& ds) {
    EncodedBatch batch;
    const int rows = static_cast<int>(ds.records.size());
    const int cols = ds.meta.n + 1;
    batch.inputs = Matrix(rows, cols);
    batch.response_bits.resize(static_cast<std::size_t>(rows));
    batch.tags = ds.tags.empty() ? std::vector<SplitTag>(static_cast<std::size_t>(rows), SplitTag::None)
                                 : ds.tags;
    for (int r = 0; r < rows; ++r) {
        const SciRecord& rec = ds.records[static_cast<std::size_t>(r)];
        const ParityVector phi = parity_vector(rec.challenge);
        std::copy(phi.begin(), phi.end(), batch.inputs.row(r));
        batch.response_bits[static_cast<std::size_t>(r)] = rec.response;
    }
    return batch;
}

}  // namespace

EncodedBatch encode_multihead(const Dataset& ds, bool use_power, bool use_reliability) {
    EncodedBatch batch = encode_common(ds);
    const int rows = batch.inputs.rows;

    Matrix response(rows, 1);
    for (int r = 0; r < rows; ++r) response.at(r, 0) = batch.response_bits[static_cast<std::size_t>(r)];
    batch.targets.push_back(std::move(response));

    if (use_power) {
        Matrix power(rows, ds.meta.chain_count + 1);
        for (int r = 0; r < rows; ++r) {
            const int label = ds.records[static_cast<std::size_t>(r)].power;
            if (label < 0 || label > ds.meta.chain_count)
                throw std::invalid_argument("encode_multihead: power label missing or out of range");
            power.at(r, label) = 1.0;
        }
        batch.targets.push_back(std::move(power));
    }
    if (use_reliability) {
        Matrix rel(rows, ds.meta.cn);
        for (int r = 0; r < rows; ++r) {
            const int label = ds.records[static_cast<std::size_t>(r)].rel_class;
            if (label < 0 || label >= ds.meta.cn)
                throw std::invalid_argument("encode_multihead: reliability label missing or out of range");
            rel.at(r, label) = 1.0;
        }
        batch.targets.push_back(std::move(rel));
    }
    return batch;
}

EncodedBatch encode_crossed(const Dataset& ds, bool use_power, bool use_reliability) {
    EncodedBatch batch = encode_common(ds);
    const int rows = batch.inputs.rows;
    const int classes = crossed_class_count(ds.meta.chain_count, ds.meta.cn, use_power, use_reliability);
    Matrix target(rows, classes);
    for (int r = 0; r < rows; ++r) {
        const int idx = feature_cross(ds.records[static_cast<std::size_t>(r)], ds.meta.chain_count,
                                      ds.meta.cn, use_power, use_reliability);
        target.at(r, idx) = 1.0;
    }
    batch.targets.push_back(std::move(target));
    return batch;
}

EncodedBatch encode_response_only(const Dataset& ds) { return encode_multihead(ds, false, false); }

}  // namespace pufatt
