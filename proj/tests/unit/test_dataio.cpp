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


#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <unistd.h>

#include "semdec/dataio.hpp"

using namespace semdec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("semdec_dataio_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    fs::path
    operator/(const std::string& name) const {
        return path / name;
    }
};

void
write_text(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

std::string
read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void
write_bytes(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary).write(s.data(), static_cast<std::streamsize>(s.size()));
}

SynthConfig
small_synth(std::uint64_t seed) {
    SynthConfig c;
    c.n_items = 60;
    c.n_users = 40;
    c.dim = 6;
    c.n_categories = 4;
    c.min_seq_len = 3;
    c.max_seq_len = 9;
    c.seed = seed;
    return c;
}

ModelParams
random_params(std::size_t dim, AggregatorKind agg) {
    ModelConfig cfg;
    cfg.dim = dim;
    cfg.level_vocab_sizes = {4, 3, 2};
    cfg.context_len = 12;
    cfg.zero_init_heads = false;
    cfg.simgr.aggregator = agg;
    cfg.seed = 17;
    return ModelParams::initialize(cfg);
}

}  // namespace

TEST_CASE("synthetic data is deterministic per seed and independent of threads") {
    const auto a = generate_synthetic(small_synth(5), 1);
    const auto b = generate_synthetic(small_synth(5), 3);
    CHECK(a.items.matrix() == b.items.matrix());
    CHECK(a.categories == b.categories);
    CHECK(a.interactions == b.interactions);
    const auto c = generate_synthetic(small_synth(6), 1);
    CHECK_FALSE(a.items.matrix() == c.items.matrix());
}

TEST_CASE("synthetic sequences respect the configuration") {
    const auto cfg = small_synth(8);
    const auto d = generate_synthetic(cfg);
    CHECK(d.items.count() == cfg.n_items);
    CHECK(d.items.dim() == cfg.dim);
    CHECK(d.interactions.size() == cfg.n_users);
    for (auto c : d.categories) {
        CHECK(c < cfg.n_categories);
    }
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        const auto& s = d.interactions.sequences[u];
        CHECK(d.interactions.users[u] == u);
        CHECK(s.size() >= cfg.min_seq_len);
        CHECK(s.size() <= cfg.max_seq_len);
        CHECK(std::set<ItemIndex>(s.begin(), s.end()).size() == s.size());
        for (auto i : s) {
            CHECK(i < cfg.n_items);
        }
    }
}

TEST_CASE("vanishing spread collapses each category to one vector") {
    auto cfg = small_synth(9);
    cfg.cluster_spread = 1e-14;
    const auto d = generate_synthetic(cfg);
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        for (std::size_t j = 0; j < cfg.n_items; ++j) {
            if (d.categories[i] == d.categories[j]) {
                for (std::size_t k = 0; k < cfg.dim; ++k) {
                    CHECK(std::abs(d.items.matrix()(i, k) - d.items.matrix()(j, k)) <= 1e-12);
                }
            }
        }
    }
}

TEST_CASE("infinite temperature gives uniform item frequencies") {
    SynthConfig cfg;
    cfg.n_items = 50;
    cfg.n_users = 10000;
    cfg.dim = 4;
    cfg.n_categories = 3;
    cfg.min_seq_len = 10;
    cfg.max_seq_len = 10;
    cfg.preference_temperature = 1e12;
    cfg.seed = 12;
    const auto d = generate_synthetic(cfg);
    std::vector<double> counts(cfg.n_items, 0.0);
    std::size_t n = 0;
    for (const auto& s : d.interactions.sequences) {
        for (auto i : s) {
            counts[i] += 1.0;
            ++n;
        }
    }
    REQUIRE(n == 100000);
    const double expected = static_cast<double>(n) / static_cast<double>(cfg.n_items);
    double stat = 0.0;
    for (double c : counts) {
        stat += (c - expected) * (c - expected) / expected;
    }
    // Draws within a user are without replacement, which only shrinks the
    // statistic relative to the multinomial reference.
    const boost::math::chi_squared dist(static_cast<double>(cfg.n_items - 1));
    const double p = boost::math::cdf(boost::math::complement(dist, stat));
    CAPTURE(stat);
    CHECK(p > 0.01);
}

TEST_CASE("synthetic config validation") {
    auto bad = small_synth(0);
    bad.n_items = 0;
    CHECK_THROWS_AS(generate_synthetic(bad), InputError);
    bad = small_synth(0);
    bad.cluster_spread = 0.0;
    CHECK_THROWS_AS(generate_synthetic(bad), InputError);
    bad = small_synth(0);
    bad.max_seq_len = 100;
    CHECK_THROWS_AS(generate_synthetic(bad), InputError);
    bad = small_synth(0);
    bad.preference_temperature = -1.0;
    CHECK_THROWS_AS(generate_synthetic(bad), InputError);
}

TEST_CASE("interaction CSV loading") {
    TempDir dir;
    write_text(dir / "three.csv", "user_id,item_id,timestamp\n4,10,300\n4,11,100\n4,12,200\n");
    const auto a = load_interactions_csv(dir / "three.csv");
    REQUIRE(a.size() == 1);
    CHECK(a.users[0] == 4);
    CHECK(a.sequences[0] == std::vector<ItemIndex>{11, 12, 10});

    write_text(dir / "empty.csv", "user_id,item_id,timestamp\n");
    CHECK(load_interactions_csv(dir / "empty.csv").size() == 0);

    write_text(dir / "bad.csv", "user_id,item_id,timestamp\n1,2,3\n1,x,4\n");
    try {
        load_interactions_csv(dir / "bad.csv");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    write_text(dir / "short.csv", "user_id,item_id,timestamp\n1,2\n");
    CHECK_THROWS_AS(load_interactions_csv(dir / "short.csv"), ParseError);
    write_text(dir / "header.csv", "user,item,ts\n");
    CHECK_THROWS_AS(load_interactions_csv(dir / "header.csv"), ParseError);
    CHECK_THROWS_AS(load_interactions_csv(dir / "absent.csv"), InputError);
}

TEST_CASE("interaction CSV ordering matches an independent sort") {
    TempDir dir;
    std::mt19937_64 rng(31);
    std::string text = "user_id,item_id,timestamp\n";
    std::vector<std::tuple<std::uint64_t, std::int64_t, std::size_t, ItemIndex>> rows;
    for (std::size_t r = 0; r < 500; ++r) {
        const std::uint64_t u = rng() % 20;
        const std::int64_t ts = static_cast<std::int64_t>(rng() % 40) - 10;
        const auto item = static_cast<ItemIndex>(rng() % 1000);
        rows.emplace_back(u, ts, r, item);
        text += std::to_string(u) + "," + std::to_string(item) + "," + std::to_string(ts) + "\n";
    }
    write_text(dir / "rand.csv", text);
    std::sort(rows.begin(), rows.end());
    Interactions oracle;
    for (const auto& [u, ts, r, item] : rows) {
        if (oracle.users.empty() || oracle.users.back() != u) {
            oracle.users.push_back(u);
            oracle.sequences.emplace_back();
        }
        oracle.sequences.back().push_back(item);
    }
    CHECK(load_interactions_csv(dir / "rand.csv") == oracle);

    save_interactions_csv(oracle, dir / "out.csv");
    CHECK(load_interactions_csv(dir / "out.csv") == oracle);
}

TEST_CASE("item vector, category and semantic-id CSV round trips") {
    TempDir dir;
    const auto d = generate_synthetic(small_synth(3));
    save_item_vectors_csv(d.items, dir / "items.csv");
    CHECK(load_item_vectors_csv(dir / "items.csv").matrix() == d.items.matrix());
    save_categories_csv(d.categories, dir / "cats.csv");
    CHECK(load_categories_csv(dir / "cats.csv") == d.categories);

    SemanticIdTable t;
    t.level_vocab_sizes = {4, 4, 3};
    t.ids = {{0, 1, 0}, {3, 2, 0}, {0, 1, 1}};
    save_semantic_ids_csv(t, dir / "sid.csv");
    const auto back = load_semantic_ids_csv(dir / "sid.csv");
    CHECK(back.ids == t.ids);
    CHECK(back.level_vocab_sizes == t.level_vocab_sizes);
    write_text(dir / "plain.csv", "item_id,t1,t2,tdedup\n1,3,2,0\n0,0,1,0\n2,0,1,1\n");
    const auto inferred = load_semantic_ids_csv(dir / "plain.csv");
    CHECK(inferred.ids == t.ids);
    CHECK(inferred.level_vocab_sizes == std::vector<std::size_t>{4, 3, 2});

    write_text(dir / "gap.csv", "item_id,v0\n0,1.0\n2,3.0\n");
    CHECK_THROWS_AS(load_item_vectors_csv(dir / "gap.csv"), InputError);
    write_text(dir / "dup.csv", "item_id,t1,tdedup\n0,1,0\n0,1,0\n");
    CHECK_THROWS_AS(load_semantic_ids_csv(dir / "dup.csv"), InputError);
    write_text(dir / "collide.csv", "item_id,t1,tdedup\n0,1,0\n1,1,0\n");
    CHECK_THROWS_AS(load_semantic_ids_csv(dir / "collide.csv"), IntegrityError);
}

TEST_CASE("checkpoint round trip is bitwise") {
    TempDir dir;
    for (auto agg : {AggregatorKind::Mean, AggregatorKind::ConcatProject, AggregatorKind::CrossAttention}) {
        const auto p = random_params(8, agg);
        save_params(p, dir / "m.ckpt");
        const auto q = load_params(dir / "m.ckpt");
        CHECK(q.config() == p.config());
        CHECK(q == p);
        CHECK(load_params(dir / "m.ckpt", p.config()) == p);
    }
    CHECK_FALSE(fs::exists(dir / "m.ckpt.tmp"));

    Codebooks books;
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n01;
    for (int l = 0; l < 3; ++l) {
        Matrix m(5, 7);
        for (double& v : m.values()) {
            v = n01(rng);
        }
        books.centroids.push_back(m);
    }
    save_codebooks(books, dir / "b.ckpt");
    const auto back = load_codebooks(dir / "b.ckpt");
    REQUIRE(back.levels() == 3);
    for (int l = 0; l < 3; ++l) {
        CHECK(back.centroids[l] == books.centroids[l]);
    }
    CHECK_THROWS_AS(load_params(dir / "b.ckpt"), SchemaError);
    CHECK_THROWS_AS(load_codebooks(dir / "m.ckpt"), SchemaError);
}

TEST_CASE("checkpoint corruption and schema errors") {
    TempDir dir;
    const auto p = random_params(8, AggregatorKind::Mean);
    save_params(p, dir / "m.ckpt");
    const std::string good = read_bytes(dir / "m.ckpt");

    std::string flipped = good;
    flipped[good.size() - 100] ^= 0x01;
    write_bytes(dir / "flip.ckpt", flipped);
    CHECK_THROWS_AS(load_params(dir / "flip.ckpt"), IntegrityError);

    write_bytes(dir / "trunc.ckpt", good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(load_params(dir / "trunc.ckpt"), IntegrityError);

    write_bytes(dir / "magic.ckpt", "NOTACKPT" + good.substr(8));
    CHECK_THROWS_AS(read_checkpoint(dir / "magic.ckpt"), IntegrityError);

    // Version 2 with a valid checksum.
    std::string v2 = good.substr(0, good.size() - 8);
    v2[8] = 2;
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : v2) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    for (int i = 0; i < 8; ++i) {
        v2.push_back(static_cast<char>((h >> (8 * i)) & 0xFF));
    }
    write_bytes(dir / "v2.ckpt", v2);
    CHECK_THROWS_AS(load_params(dir / "v2.ckpt"), VersionError);

    auto wrong = p.config();
    wrong.dim = 16;
    try {
        load_params(dir / "m.ckpt", wrong);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("'token_embeddings'") != std::string::npos);
    }
    auto extra = p.config();
    extra.simgr.aggregator = AggregatorKind::ProjectPool;
    CHECK_THROWS_WITH_AS(load_params(dir / "m.ckpt", extra), doctest::Contains("aggregator.0"), SchemaError);

    CHECK_THROWS_AS(load_params(dir / "missing.ckpt"), InputError);
}
