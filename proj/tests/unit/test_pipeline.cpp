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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "semdec/pipeline.hpp"

using namespace semdec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("semdec_pipe_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void
write_text(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

std::string
read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kTiny = R"(seed = 4
threads = 2

[data]
n_items = 64
n_users = 120
dim = 8
n_categories = 4
min_seq_len = 5
max_seq_len = 9
max_len = 8

[tokenizer]
levels = 2
codebook_size = 4
iters = 10
restarts = 1

[model]
dim = 8

[train]
epochs = 2
batch_size = 16
lr = 0.01

[decode]
beam_size = 4
beam_sizes = [1, 3]
ks = [1, 5, 10]

[analysis]
users = 20
theorem2_instances = 50
)";

int
run_cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = "SEMDEC_LOG=error " + env + " " + std::string(SEMDEC_CLI_PATH) + " " + args + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

ComparisonRow
row(const std::string& p, std::uint64_t split = 7) {
    ComparisonRow r;
    r.paradigm = p;
    r.split_fingerprint = split;
    r.decode_seconds = 0.5;
    r.metrics.ks = {1, 5, 10};
    for (std::size_t k : {1, 5, 10}) {
        r.metrics.hr[k] = 0.1 * static_cast<double>(k);
        r.metrics.ndcg[k] = 0.05 * static_cast<double>(k);
        r.metrics.entropy[k] = 1.0;
        r.metrics.coverage[k] = 0.25;
    }
    return r;
}

}  // namespace

TEST_CASE("config defaults, overrides and canonical rendering") {
    TempDir dir("cfg");
    write_text(dir.path / "empty.toml", "# nothing set\n");
    const auto d = RunConfig::load(dir.path / "empty.toml");
    CHECK(d.to_toml() == RunConfig{}.to_toml());
    CHECK(d.decode.beam_sizes == std::vector<std::size_t>{1, 2, 5, 10, 20, 50, 512});
    CHECK(d.data.synth.n_items == 512);
    CHECK(d.data.synth.n_users == 1000);
    d.validate();

    write_text(dir.path / "tiny.toml", kTiny);
    const auto t = RunConfig::load(dir.path / "tiny.toml");
    CHECK(t.seed == 4);
    CHECK(t.tokenizer.levels == 2);
    CHECK(t.decode.ks == std::vector<std::size_t>{1, 5, 10});
    CHECK(t.train.adamw.lr == 0.01);
    write_text(dir.path / "again.toml", t.to_toml());
    CHECK(RunConfig::load(dir.path / "again.toml").to_toml() == t.to_toml());
}

TEST_CASE("config errors carry a location") {
    TempDir dir("cfgerr");
    auto expect = [&](const std::string& text, const std::string& needle) {
        write_text(dir.path / "bad.toml", text);
        try {
            RunConfig::load(dir.path / "bad.toml").validate();
            FAIL("expected a config error for: " << text);
        } catch (const ConfigError& e) {
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
        }
    };
    expect("seed = 1\n[data]\nn_itemz = 4\n", "bad.toml:3:1: unknown key 'data.n_itemz'");
    expect("[train]\nepochs = \"many\"\n", "bad.toml:2:10: 'train.epochs' must be a non-negative integer");
    expect("[model]\naggregator = \"median\"\n", "unknown aggregator");
    expect("[decode]\nks = []\n", "decode.ks must not be empty");
    expect("[extra]\nx = 1\n", "unknown key 'extra'");
    expect("seed = \n", "bad.toml:1:");
    expect("[data]\nsource = \"csv\"\ninteractions = \"nope.csv\"\nitem_vectors = \"nope.csv\"\n",
           "data.interactions: file not found");
    CHECK_THROWS_AS(RunConfig::load(dir.path / "absent.toml"), ConfigError);
}

TEST_CASE("comparison table") {
    const auto csv = compare_paradigms({row("simgr"), row("ar"), row("parallel")});
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "paradigm,hr@1,hr@5,hr@10,ndcg@5,ndcg@10,entropy@10,coverage@10,decode_seconds");
    CHECK(lines[1].rfind("ar,", 0) == 0);
    CHECK(lines[2].rfind("parallel,", 0) == 0);
    CHECK(lines[3].rfind("simgr,", 0) == 0);
    for (const auto& l : lines) {
        CHECK(std::count(l.begin(), l.end(), ',') == 8);
    }
    CHECK_THROWS_WITH_AS(compare_paradigms({row("ar"), row("simgr")}), doctest::Contains("'parallel'"), InputError);
    CHECK_THROWS_WITH_AS(compare_paradigms({row("ar"), row("parallel"), row("simgr", 8)}),
                         doctest::Contains("different split"), InputError);
    auto no10 = row("ar");
    no10.metrics.hr.erase(10);
    CHECK_THROWS_AS(compare_paradigms({no10, row("parallel"), row("simgr")}), InputError);
}

TEST_CASE("cli: end-to-end smoke run, determinism and skipping") {
    TempDir dir("e2e");
    write_text(dir.path / "tiny.toml", kTiny);
    const auto cfg = (dir.path / "tiny.toml").string();
    const auto a = dir.path / "a";
    const auto b = dir.path / "b";
    REQUIRE(run_cli("all --config " + cfg + " --out " + a.string()) == 0);
    for (const char* f : {"reports/metrics_ar.json", "reports/metrics_parallel.json", "reports/metrics_simgr.json",
                          "reports/metrics_ar.csv", "reports/overlap.json", "reports/overlap.csv",
                          "reports/shift.json", "reports/comparison.csv", "decode/ar.csv", "decode/simgr.csv",
                          "models/ar.ckpt", "models/ar_train_log.csv", "tokenizer/semantic_ids.csv",
                          "tokenizer/codebooks.ckpt", "run_metadata.json", "resolved_config.toml"}) {
        CHECK_MESSAGE(fs::exists(a / f), f);
    }
    CHECK(read_text(a / "models/ar_train_log.csv").rfind("step,objective,loss\n0,ar,", 0) == 0);
    CHECK(read_text(a / "decode/parallel.csv").rfind("user_id,rank,item_id,log_score\n", 0) == 0);

    REQUIRE(run_cli("all --config " + cfg + " --out " + b.string() + " --threads 1") == 0);
    for (const auto& e : fs::recursive_directory_iterator(a / "reports")) {
        if (e.path().extension() == ".json") {
            CHECK_MESSAGE(read_text(e.path()) == read_text(b / "reports" / e.path().filename()), e.path());
        }
    }
    CHECK(read_text(a / "decode/ar.csv") == read_text(b / "decode/ar.csv"));

    // Existing outputs are kept; --force recomputes them identically.
    const auto before = fs::last_write_time(a / "models/ar.ckpt");
    REQUIRE(run_cli("train --config " + cfg + " --out " + a.string()) == 0);
    CHECK(fs::last_write_time(a / "models/ar.ckpt") == before);
    const auto metrics = read_text(a / "reports/metrics_simgr.json");
    REQUIRE(run_cli("evaluate --force --config " + cfg + " --out " + a.string()) == 0);
    CHECK(read_text(a / "reports/metrics_simgr.json") == metrics);
}

TEST_CASE("cli: a beam as wide as the trie saturates the overlap") {
    TempDir dir("sat");
    write_text(dir.path / "tiny.toml", kTiny);
    const auto out = dir.path / "o";
    REQUIRE(run_cli("analyze --objective ar --beam 1,64 --topk 1,5 --config " + (dir.path / "tiny.toml").string() +
                    " --out " + out.string()) == 0);
    const auto text = read_text(out / "reports/overlap.csv");
    CHECK(text.find("\n64,1,1,1,") != std::string::npos);
    CHECK(text.find("\n64,5,1,1,") != std::string::npos);
    CHECK_FALSE(fs::exists(out / "models/simgr.ckpt"));
}

TEST_CASE("cli: exit codes") {
    TempDir dir("codes");
    const auto out = dir.path / "never";
    write_text(dir.path / "missing.toml", "[data]\nsource = \"csv\"\ninteractions = \"/nonexistent/x.csv\"\n"
                                          "item_vectors = \"/nonexistent/v.csv\"\n");
    CHECK(run_cli("all --config " + (dir.path / "missing.toml").string() + " --out " + out.string()) == 2);
    CHECK_FALSE(fs::exists(out));
    write_text(dir.path / "syntax.toml", "seed = = 3\n");
    CHECK(run_cli("all --config " + (dir.path / "syntax.toml").string() + " --out " + out.string()) == 2);
    CHECK(run_cli("all --out " + out.string() + " --beam 0") == 2);
    CHECK(run_cli("all --out " + out.string() + " --objective beam") == 2);
    CHECK(run_cli("all --out " + out.string(), "SEMDEC_LOG=loud") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK_FALSE(fs::exists(out));

    // Interactions referencing items without vectors fail inside tokenize.
    write_text(dir.path / "inter.csv", "user_id,item_id,timestamp\n1,0,1\n1,1,2\n1,5,3\n1,0,4\n1,1,5\n");
    write_text(dir.path / "vec.csv", "item_id,v0\n0,0.5\n1,1.5\n");
    write_text(dir.path / "csv.toml", "[data]\nsource = \"csv\"\ninteractions = \"" +
                                          (dir.path / "inter.csv").string() + "\"\nitem_vectors = \"" +
                                          (dir.path / "vec.csv").string() + "\"\n");
    CHECK(run_cli("tokenize --config " + (dir.path / "csv.toml").string() + " --out " + (dir.path / "c").string()) ==
          1);

    // A violated bound is a hard failure: many-to-one item maps break the
    // per-item chi-square bound on some random joints.
    write_text(dir.path / "tiny.toml", std::string(kTiny) + "theorem2_many_to_one = true\n");
    CHECK(run_cli("analyze --objective ar --config " + (dir.path / "tiny.toml").string() + " --out " +
                  (dir.path / "m").string()) == 3);
    CHECK(read_text(dir.path / "m/reports/shift.json").find("\"many_to_one\"") != std::string::npos);
}
