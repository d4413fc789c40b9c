// Copyright 2026 The semdec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "semdec/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "semdec/aggregator.hpp"
#include "semdec/parallel.hpp"
#include "semdec/rng.hpp"
#include "semdec/simd.hpp"

namespace semdec {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Synthetic data

void
SynthConfig::validate() const {
    if (n_items == 0 || n_users == 0 || dim == 0 || n_categories == 0) {
        throw InputError("synthetic config: counts must be >= 1");
    }
    if (!(cluster_spread > 0.0) || !std::isfinite(cluster_spread)) {
        throw InputError("synthetic config: cluster_spread must be > 0");
    }
    if (!(preference_temperature > 0.0)) {
        throw InputError("synthetic config: preference_temperature must be > 0");
    }
    if (!(drift >= 0.0 && drift <= 1.0)) {
        throw InputError("synthetic config: drift must be in [0, 1]");
    }
    if (min_seq_len == 0 || min_seq_len > max_seq_len) {
        throw InputError("synthetic config: need 1 <= min_seq_len <= max_seq_len");
    }
    if (max_seq_len > n_items) {
        throw InputError("synthetic config: max_seq_len exceeds n_items");
    }
}

SyntheticData
generate_synthetic(const SynthConfig& cfg, std::size_t threads) {
    cfg.validate();
    const std::size_t d = cfg.dim;
    Matrix centers(cfg.n_categories, d);
    for (std::size_t c = 0; c < cfg.n_categories; ++c) {
        auto rng = make_stream(cfg.seed, "synth.center", c);
        std::normal_distribution<double> n01;
        for (double& v : centers.row(c)) {
            v = n01(rng);
        }
    }
    Matrix items(cfg.n_items, d);
    std::vector<std::uint32_t> categories(cfg.n_items);
    parallel_for(cfg.n_items, threads, [&](std::size_t i) {
        auto rng = make_stream(cfg.seed, "synth.item", i);
        std::normal_distribution<double> n01;
        const auto c = static_cast<std::uint32_t>(rng() % cfg.n_categories);
        categories[i] = c;
        auto row = items.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = centers(c, j) + cfg.cluster_spread * n01(rng);
        }
    });

    SyntheticData out{ItemVectors(items), std::move(categories), {}};
    out.interactions.users.resize(cfg.n_users);
    out.interactions.sequences.resize(cfg.n_users);
    const double scale = 1.0 / (std::sqrt(static_cast<double>(d)) * cfg.preference_temperature);
    parallel_for(cfg.n_users, threads, [&](std::size_t u) {
        auto rng = make_stream(cfg.seed, "synth.user", u);
        std::normal_distribution<double> n01;
        const std::size_t len = cfg.min_seq_len + rng() % (cfg.max_seq_len - cfg.min_seq_len + 1);
        const std::size_t fav = rng() % cfg.n_categories;
        std::vector<double> pref(d);
        for (std::size_t j = 0; j < d; ++j) {
            pref[j] = centers(fav, j) + 0.5 * n01(rng);
        }
        std::vector<char> used(cfg.n_items, 0);
        std::vector<double> w(cfg.n_items);
        auto& seq = out.interactions.sequences[u];
        for (std::size_t t = 0; t < len; ++t) {
            double m = -INFINITY;
            for (std::size_t i = 0; i < cfg.n_items; ++i) {
                w[i] = used[i] ? -INFINITY : simd::dot(pref, items.row(i)) * scale;
                m = std::max(m, w[i]);
            }
            double z = 0.0;
            for (double& v : w) {
                v = std::exp(v - m);
                z += v;
            }
            const double r = std::generate_canonical<double, 53>(rng) * z;
            std::size_t pick = 0;
            double acc = 0.0;
            std::size_t last_free = 0;
            for (; pick < cfg.n_items; ++pick) {
                if (used[pick]) {
                    continue;
                }
                last_free = pick;
                acc += w[pick];
                if (r < acc) {
                    break;
                }
            }
            pick = std::min(pick, last_free);
            used[pick] = 1;
            seq.push_back(static_cast<ItemIndex>(pick));
            for (std::size_t j = 0; j < d; ++j) {
                pref[j] += cfg.drift * (items(pick, j) - pref[j]);
            }
        }
        out.interactions.users[u] = u;
    });
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view>
split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

template <typename T>
T
parse_number(std::string_view s, std::size_t line, const char* what) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end) {
        throw ParseError(std::string("malformed ") + what + " '" + std::string(s) + "'", line);
    }
    return v;
}

class LineReader {
public:
    explicit LineReader(const fs::path& path) : in_(path) {
        if (!in_) {
            throw InputError("cannot open " + path.string());
        }
    }
    // Next non-empty line with any trailing CR removed.
    bool
    next(std::string& line) {
        while (std::getline(in_, line)) {
            ++number_;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (!line.empty()) {
                return true;
            }
        }
        return false;
    }
    std::size_t
    number() const noexcept {
        return number_;
    }

private:
    std::ifstream in_;
    std::size_t number_ = 0;
};

std::ofstream
open_out(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
    return out;
}

std::string
format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void
check_id_cover(const std::vector<char>& seen, const fs::path& path) {
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (!seen[i]) {
            throw InputError(path.string() + ": item ids must cover 0.." + std::to_string(seen.size() - 1) +
                             " (missing " + std::to_string(i) + ")");
        }
    }
}

// Reads rows `item_id,<fields...>` into slots indexed by item id.
template <typename Row>
std::vector<Row>
read_item_rows(const fs::path& path,
               const std::function<void(const std::vector<std::string_view>&, std::size_t)>& check_header,
               const std::function<Row(const std::vector<std::string_view>&, std::size_t)>& parse) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) {
        throw ParseError("missing header", 1);
    }
    if (line.rfind('#', 0) == 0) {
        if (!reader.next(line)) {
            throw ParseError("missing header", reader.number() + 1);
        }
    }
    check_header(split_fields(line), reader.number());
    std::vector<std::pair<std::size_t, Row>> rows;
    while (reader.next(line)) {
        const auto f = split_fields(line);
        const auto id = parse_number<std::size_t>(f[0], reader.number(), "item_id");
        rows.emplace_back(id, parse(f, reader.number()));
    }
    std::vector<Row> out(rows.size());
    std::vector<char> seen(rows.size(), 0);
    for (auto& [id, row] : rows) {
        if (id >= rows.size() || seen[id]) {
            throw InputError(path.string() + ": item id " + std::to_string(id) + " is duplicated or out of range");
        }
        seen[id] = 1;
        out[id] = std::move(row);
    }
    check_id_cover(seen, path);
    return out;
}

}  // namespace

Interactions
load_interactions_csv(const fs::path& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line) || line != "user_id,item_id,timestamp") {
        throw ParseError("expected header 'user_id,item_id,timestamp'", std::max<std::size_t>(reader.number(), 1));
    }
    struct Event {
        std::int64_t ts;
        std::size_t order;
        ItemIndex item;
    };
    std::map<UserId, std::vector<Event>> by_user;
    std::size_t order = 0;
    while (reader.next(line)) {
        const auto f = split_fields(line);
        if (f.size() != 3) {
            throw ParseError("expected 3 fields, found " + std::to_string(f.size()), reader.number());
        }
        const auto user = parse_number<UserId>(f[0], reader.number(), "user_id");
        const auto item = parse_number<ItemIndex>(f[1], reader.number(), "item_id");
        const auto ts = parse_number<std::int64_t>(f[2], reader.number(), "timestamp");
        by_user[user].push_back({ts, order++, item});
    }
    Interactions out;
    for (auto& [user, events] : by_user) {
        std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.ts < b.ts; });
        out.users.push_back(user);
        auto& seq = out.sequences.emplace_back();
        for (const auto& e : events) {
            seq.push_back(e.item);
        }
    }
    return out;
}

void
save_interactions_csv(const Interactions& data, const fs::path& path) {
    auto out = open_out(path);
    out << "user_id,item_id,timestamp\n";
    for (std::size_t u = 0; u < data.size(); ++u) {
        for (std::size_t t = 0; t < data.sequences[u].size(); ++t) {
            out << data.users[u] << ',' << data.sequences[u][t] << ',' << t << '\n';
        }
    }
}

ItemVectors
load_item_vectors_csv(const fs::path& path) {
    std::size_t width = 0;
    auto rows = read_item_rows<std::vector<double>>(
        path,
        [&](const std::vector<std::string_view>& h, std::size_t line) {
            if (h.size() < 2 || h[0] != "item_id") {
                throw ParseError("expected header 'item_id,v0,...'", line);
            }
            width = h.size() - 1;
        },
        [&](const std::vector<std::string_view>& f, std::size_t line) {
            if (f.size() != width + 1) {
                throw ParseError("expected " + std::to_string(width + 1) + " fields, found " +
                                     std::to_string(f.size()), line);
            }
            std::vector<double> v(width);
            for (std::size_t j = 0; j < width; ++j) {
                v[j] = parse_number<double>(f[j + 1], line, "vector component");
            }
            return v;
        });
    Matrix m(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return ItemVectors(std::move(m));
}

void
save_item_vectors_csv(const ItemVectors& items, const fs::path& path) {
    auto out = open_out(path);
    out << "item_id";
    for (std::size_t j = 0; j < items.dim(); ++j) {
        out << ",v" << j;
    }
    out << '\n';
    for (std::size_t i = 0; i < items.count(); ++i) {
        out << i;
        for (double v : items.row(i)) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
}

std::vector<std::uint32_t>
load_categories_csv(const fs::path& path) {
    return read_item_rows<std::uint32_t>(
        path,
        [](const std::vector<std::string_view>& h, std::size_t line) {
            if (h.size() != 2 || h[0] != "item_id" || h[1] != "category") {
                throw ParseError("expected header 'item_id,category'", line);
            }
        },
        [](const std::vector<std::string_view>& f, std::size_t line) {
            if (f.size() != 2) {
                throw ParseError("expected 2 fields, found " + std::to_string(f.size()), line);
            }
            return parse_number<std::uint32_t>(f[1], line, "category");
        });
}

void
save_categories_csv(const std::vector<std::uint32_t>& categories, const fs::path& path) {
    auto out = open_out(path);
    out << "item_id,category\n";
    for (std::size_t i = 0; i < categories.size(); ++i) {
        out << i << ',' << categories[i] << '\n';
    }
}

SemanticIdTable
load_semantic_ids_csv(const fs::path& path) {
    std::vector<std::size_t> vocab;
    {
        LineReader reader(path);
        std::string line;
        if (reader.next(line) && line.rfind("# vocab", 0) == 0) {
            std::istringstream ss(line.substr(7));
            std::size_t v = 0;
            while (ss >> v) {
                vocab.push_back(v);
            }
        }
    }
    std::size_t width = 0;
    SemanticIdTable t;
    t.ids = read_item_rows<TokenSeq>(
        path,
        [&](const std::vector<std::string_view>& h, std::size_t line) {
            if (h.size() < 2 || h[0] != "item_id" || h.back() != "tdedup") {
                throw ParseError("expected header 'item_id,t1,...,tL,tdedup'", line);
            }
            width = h.size() - 1;
        },
        [&](const std::vector<std::string_view>& f, std::size_t line) {
            if (f.size() != width + 1) {
                throw ParseError("expected " + std::to_string(width + 1) + " fields, found " +
                                     std::to_string(f.size()), line);
            }
            TokenSeq s(width);
            for (std::size_t j = 0; j < width; ++j) {
                s[j] = parse_number<Token>(f[j + 1], line, "token");
            }
            return s;
        });
    if (vocab.empty()) {
        vocab.assign(width, 0);
        for (const auto& s : t.ids) {
            for (std::size_t j = 0; j < width; ++j) {
                vocab[j] = std::max<std::size_t>(vocab[j], s[j] + 1);
            }
        }
    }
    if (vocab.size() != width) {
        throw InputError(path.string() + ": vocab line has " + std::to_string(vocab.size()) + " sizes for " +
                         std::to_string(width) + " token columns");
    }
    t.level_vocab_sizes = std::move(vocab);
    validate_table(t);
    return t;
}

void
save_semantic_ids_csv(const SemanticIdTable& table, const fs::path& path) {
    auto out = open_out(path);
    out << "# vocab";
    for (auto v : table.level_vocab_sizes) {
        out << ' ' << v;
    }
    out << "\nitem_id";
    for (std::size_t j = 0; j + 1 < table.length(); ++j) {
        out << ",t" << j + 1;
    }
    out << ",tdedup\n";
    for (std::size_t i = 0; i < table.item_count(); ++i) {
        out << i;
        for (Token t : table.ids[i]) {
            out << ',' << t;
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'D', 'E', 'C', 'K', 'P'};

class Fnv1a {
public:
    void
    update(const char* p, std::size_t n) noexcept {
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= static_cast<unsigned char>(p[i]);
            h_ *= 0x100000001B3ULL;
        }
    }
    std::uint64_t
    value() const noexcept {
        return h_;
    }

private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

template <typename U>
void
put_le(std::string& buf, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

template <typename U>
U
get_le(const std::string& buf, std::size_t& pos, const fs::path& path) {
    if (buf.size() - pos < sizeof(U)) {
        throw IntegrityError(path.string() + ": truncated checkpoint");
    }
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        v |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    }
    pos += sizeof(U);
    return v;
}

}  // namespace

void
write_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    json header;
    header["kind"] = ckpt.kind;
    header["config"] = json::parse(ckpt.config_json.empty() ? "{}" : ckpt.config_json);
    header["blocks"] = json::array();
    for (const auto& b : ckpt.blocks) {
        header["blocks"].push_back({{"name", b.name}, {"rows", b.value.rows()}, {"cols", b.value.cols()}});
    }
    const std::string h = header.dump();
    std::string buf(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(buf, kCheckpointVersion);
    put_le<std::uint64_t>(buf, h.size());
    buf += h;
    for (const auto& b : ckpt.blocks) {
        for (double v : b.value.values()) {
            put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(v));
        }
    }
    Fnv1a fnv;
    fnv.update(buf.data(), buf.size());
    put_le<std::uint64_t>(buf, fnv.value());

    fs::path tmp = path;
    tmp += ".tmp";
    {
        auto out = open_out(tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) {
            throw InputError("failed writing " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

Checkpoint
read_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open checkpoint " + path.string());
    }
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < sizeof kMagic + 4 + 8 + 8 || !std::equal(kMagic, kMagic + 8, buf.begin())) {
        throw IntegrityError(path.string() + ": not a checkpoint (bad magic)");
    }
    std::size_t tail = buf.size() - 8;
    const auto stored = get_le<std::uint64_t>(buf, tail, path);
    Fnv1a fnv;
    fnv.update(buf.data(), buf.size() - 8);
    if (fnv.value() != stored) {
        throw IntegrityError(path.string() + ": checksum mismatch");
    }
    std::size_t pos = sizeof kMagic;
    const auto version = get_le<std::uint32_t>(buf, pos, path);
    if (version != kCheckpointVersion) {
        throw VersionError(path.string() + ": checkpoint format version " + std::to_string(version) +
                           ", this build reads version " + std::to_string(kCheckpointVersion));
    }
    const auto hlen = get_le<std::uint64_t>(buf, pos, path);
    if (hlen > buf.size() - 8 - pos) {
        throw IntegrityError(path.string() + ": truncated header");
    }
    json header;
    try {
        header = json::parse(buf.substr(pos, hlen));
    } catch (const json::exception& e) {
        throw IntegrityError(path.string() + ": unreadable header: " + e.what());
    }
    pos += hlen;
    Checkpoint ck;
    try {
        ck.kind = header.at("kind").get<std::string>();
        ck.config_json = header.at("config").dump();
        for (const auto& b : header.at("blocks")) {
            CheckpointBlock blk;
            blk.name = b.at("name").get<std::string>();
            blk.value = Matrix(b.at("rows").get<std::size_t>(), b.at("cols").get<std::size_t>());
            ck.blocks.push_back(std::move(blk));
        }
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": malformed header: " + e.what());
    }
    const std::size_t end = buf.size() - 8;
    for (auto& blk : ck.blocks) {
        if ((end - pos) / 8 < blk.value.size()) {
            throw IntegrityError(path.string() + ": payload of block '" + blk.name + "' is truncated");
        }
        for (double& v : blk.value.values()) {
            v = std::bit_cast<double>(get_le<std::uint64_t>(buf, pos, path));
        }
    }
    if (pos != end) {
        throw IntegrityError(path.string() + ": trailing bytes after the last block");
    }
    return ck;
}

std::string
model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["dim"] = cfg.dim;
    j["level_vocab_sizes"] = cfg.level_vocab_sizes;
    j["context_len"] = cfg.context_len;
    j["encoder_blocks"] = cfg.encoder_blocks;
    j["heads"] = cfg.heads;
    j["ff_mult"] = cfg.ff_mult;
    j["zero_init_heads"] = cfg.zero_init_heads;
    j["seed"] = cfg.seed;
    j["simgr"] = {{"tau", cfg.simgr.tau},
                  {"aggregator", std::string(aggregator_name(cfg.simgr.aggregator))},
                  {"include_dedup", cfg.simgr.include_dedup},
                  {"cosine", cfg.simgr.cosine}};
    return j.dump();
}

ModelConfig
model_config_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        ModelConfig c;
        c.dim = j.at("dim").get<std::size_t>();
        c.level_vocab_sizes = j.at("level_vocab_sizes").get<std::vector<std::size_t>>();
        c.context_len = j.at("context_len").get<std::size_t>();
        c.encoder_blocks = j.at("encoder_blocks").get<std::size_t>();
        c.heads = j.at("heads").get<std::size_t>();
        c.ff_mult = j.at("ff_mult").get<std::size_t>();
        c.zero_init_heads = j.at("zero_init_heads").get<bool>();
        c.seed = j.at("seed").get<std::uint64_t>();
        const auto& s = j.at("simgr");
        c.simgr.tau = s.at("tau").get<double>();
        c.simgr.aggregator = parse_aggregator(s.at("aggregator").get<std::string>());
        c.simgr.include_dedup = s.at("include_dedup").get<bool>();
        c.simgr.cosine = s.at("cosine").get<bool>();
        return c;
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model config: ") + e.what());
    } catch (const InputError& e) {
        throw SchemaError(std::string("model config: ") + e.what());
    }
}

void
save_params(const ModelParams& params, const fs::path& path) {
    Checkpoint ck;
    ck.kind = "model";
    ck.config_json = model_config_to_json(params.config());
    for (std::size_t i = 0; i < params.block_count(); ++i) {
        ck.blocks.push_back({params.block_name(i), params.block(i)});
    }
    write_checkpoint(ck, path);
}

namespace {

Checkpoint
read_kind(const fs::path& path, std::string_view kind) {
    auto ck = read_checkpoint(path);
    if (ck.kind != kind) {
        throw SchemaError(path.string() + ": holds '" + ck.kind + "', expected '" + std::string(kind) + "'");
    }
    return ck;
}

ModelParams
fill_params(const Checkpoint& ck, const ModelConfig& cfg, const fs::path& path) {
    ModelParams p;
    try {
        p = ModelParams(cfg);
    } catch (const InputError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    std::map<std::string, const Matrix*> stored;
    for (const auto& b : ck.blocks) {
        stored[b.name] = &b.value;
    }
    for (std::size_t i = 0; i < p.block_count(); ++i) {
        const auto& name = p.block_name(i);
        const auto it = stored.find(name);
        if (it == stored.end()) {
            throw SchemaError(path.string() + ": block '" + name + "' is missing");
        }
        const Matrix& m = *it->second;
        if (m.rows() != p.block(i).rows() || m.cols() != p.block(i).cols()) {
            throw SchemaError(path.string() + ": block '" + name + "' is " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", configuration expects " +
                              std::to_string(p.block(i).rows()) + "x" + std::to_string(p.block(i).cols()));
        }
        p.block(i) = m;
        stored.erase(it);
    }
    if (!stored.empty()) {
        throw SchemaError(path.string() + ": unexpected block '" + stored.begin()->first + "'");
    }
    return p;
}

}  // namespace

ModelParams
load_params(const fs::path& path) {
    const auto ck = read_kind(path, "model");
    return fill_params(ck, model_config_from_json(ck.config_json), path);
}

ModelParams
load_params(const fs::path& path, const ModelConfig& expected) {
    return fill_params(read_kind(path, "model"), expected, path);
}

void
save_codebooks(const Codebooks& books, const fs::path& path) {
    Checkpoint ck;
    ck.kind = "codebooks";
    ck.config_json =
        json{{"levels", books.levels()}, {"codebook_size", books.codebook_size()}, {"dim", books.dim()}}.dump();
    for (std::size_t l = 0; l < books.levels(); ++l) {
        ck.blocks.push_back({"level" + std::to_string(l), books.centroids[l]});
    }
    write_checkpoint(ck, path);
}

Codebooks
load_codebooks(const fs::path& path) {
    const auto ck = read_kind(path, "codebooks");
    Codebooks books;
    std::size_t levels = 0;
    std::size_t k = 0;
    std::size_t d = 0;
    try {
        const json c = json::parse(ck.config_json);
        levels = c.at("levels").get<std::size_t>();
        k = c.at("codebook_size").get<std::size_t>();
        d = c.at("dim").get<std::size_t>();
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": codebook config: " + e.what());
    }
    if (ck.blocks.size() != levels) {
        throw SchemaError(path.string() + ": expected " + std::to_string(levels) + " codebook blocks");
    }
    for (std::size_t l = 0; l < levels; ++l) {
        const auto& b = ck.blocks[l];
        if (b.name != "level" + std::to_string(l) || b.value.rows() != k || b.value.cols() != d) {
            throw SchemaError(path.string() + ": block '" + b.name + "' does not match " + std::to_string(k) + "x" +
                              std::to_string(d) + " level" + std::to_string(l));
        }
        books.centroids.push_back(b.value);
    }
    return books;
}

}  // namespace semdec
