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


#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "semdec/analysis.hpp"
#include "semdec/decoding.hpp"
#include "semdec/parallel.hpp"
#include "semdec/pipeline.hpp"
#include "semdec/rng.hpp"
#include "semdec/simgr.hpp"

namespace semdec {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

LogLevel
log_level_from_env() {
    const char* v = std::getenv("SEMDEC_LOG");
    const std::string_view s = v == nullptr ? "" : v;
    if (s.empty() || s == "info") {
        return LogLevel::Info;
    }
    if (s == "error") {
        return LogLevel::Error;
    }
    if (s == "debug") {
        return LogLevel::Debug;
    }
    throw ConfigError("SEMDEC_LOG must be error, info or debug, got '" + std::string(s) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

double
seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string
read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw InputError("cannot read " + p.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void
write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << text;
        if (!out) {
            throw InputError("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, p);
}

std::string
format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Short form for log lines.
std::string
format_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Everything the stages after tokenize read back from the output directory.
struct Workspace {
    SplitDataset split;
    std::vector<std::uint32_t> categories;
    SemanticIdTable table;
    PrefixTrie trie;
};

Workspace
load_workspace(const RunConfig& cfg) {
    Workspace ws;
    const auto dir = cfg.out_dir;
    ws.split = leave_one_out_split(load_interactions_csv(dir / "data" / "interactions.csv"), cfg.data.split);
    ws.categories = load_categories_csv(dir / "data" / "categories.csv");
    ws.table = load_semantic_ids_csv(dir / "tokenizer" / "semantic_ids.csv");
    ws.trie = build_prefix_trie(ws.table);
    return ws;
}

std::uint64_t
split_fingerprint(const SplitDataset& split) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    };
    for (const auto& u : split.users) {
        mix(u.user);
        mix(u.validation);
        mix(u.test);
        mix(u.train.size());
    }
    return h;
}

ModelConfig
model_config_for(const RunConfig& cfg, const SemanticIdTable& table, Objective obj) {
    ModelConfig m = cfg.model;
    m.level_vocab_sizes = table.level_vocab_sizes;
    // BOS, max_len history items and an AR prefix of S - 1 tokens.
    m.context_len = (cfg.data.split.max_len + 1) * table.length();
    m.seed = stream_seed(cfg.seed, "model", static_cast<std::uint64_t>(obj));
    return m;
}

UserLists
read_decode_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot read " + path.string());
    }
    std::string line;
    std::getline(in, line);
    if (line != "user_id,rank,item_id,log_score") {
        throw ParseError("expected header 'user_id,rank,item_id,log_score' in " + path.string(), 1);
    }
    UserLists lists;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) {
            continue;
        }
        std::istringstream ss(line);
        UserId user = 0;
        std::size_t rank = 0;
        ItemIndex item = 0;
        double score = 0.0;
        char c1 = 0;
        char c2 = 0;
        char c3 = 0;
        if (!(ss >> user >> c1 >> rank >> c2 >> item >> c3 >> score) || c1 != ',' || c2 != ',' || c3 != ',') {
            throw ParseError("malformed decode row in " + path.string(), n);
        }
        auto& l = lists[user];
        if (rank != l.entries.size() + 1) {
            throw ParseError("ranks must be consecutive from 1 in " + path.string(), n);
        }
        l.entries.push_back({item, score});
    }
    return lists;
}

MetricsReport
metrics_from_json(const ojson& j) {
    MetricsReport r;
    r.users = j.at("users").get<std::size_t>();
    r.item_count = j.at("item_count").get<std::size_t>();
    r.ks = j.at("ks").get<std::vector<std::size_t>>();
    for (std::size_t k : r.ks) {
        const auto key = std::to_string(k);
        r.hr[k] = j.at("hr").at(key).get<double>();
        r.ndcg[k] = j.at("ndcg").at(key).get<double>();
        r.entropy[k] = j.at("entropy").at(key).get<double>();
        r.coverage[k] = j.at("coverage").at(key).get<double>();
    }
    return r;
}

DistributionPair
shift_fixture() {
    DistributionPair p;
    p.vocab = {2, 2};
    p.p_star = {0.4, 0.1, 0.1, 0.4};
    p.p_tilde = product_of_marginals(p.p_star, p.vocab);
    p.item_map = {0, 1, 2, 3};
    p.item_count = 4;
    return p;
}

ojson
sweep_json(const Theorem2Sweep& s, bool many_to_one) {
    ojson j;
    j["item_map"] = many_to_one ? "many_to_one" : "bijective";
    j["instances"] = s.instances;
    j["violations"] = s.violations;
    j["grouped_violations"] = s.grouped_violations;
    j["worst_ratio"] = s.worst_ratio;
    return j;
}

template <typename Fn>
void
run_stage(const std::string& stage, Fn&& fn) {
    try {
        fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ItemIndex>
test_history(const UserSplit& u, std::size_t max_len) {
    std::vector<ItemIndex> h = u.train;
    h.push_back(u.validation);
    if (h.size() > max_len) {
        h.erase(h.begin(), h.end() - static_cast<std::ptrdiff_t>(max_len));
    }
    return h;
}

std::string
compare_paradigms(const std::vector<ComparisonRow>& rows) {
    auto find = [&](std::string_view p) {
        return std::find_if(rows.begin(), rows.end(), [&](const ComparisonRow& r) { return r.paradigm == p; });
    };
    for (const char* p : kParadigms) {
        if (find(p) == rows.end()) {
            throw InputError(std::string("compare: paradigm '") + p + "' has no evaluation report");
        }
    }
    for (const auto& r : rows) {
        if (r.split_fingerprint != rows.front().split_fingerprint) {
            throw InputError("compare: paradigm '" + r.paradigm + "' was evaluated on a different split than '" +
                             rows.front().paradigm + "'");
        }
        for (std::size_t k : {1, 5, 10}) {
            if (!r.metrics.hr.contains(k)) {
                throw InputError("compare: report of '" + r.paradigm + "' lacks K=" + std::to_string(k));
            }
        }
    }
    std::string out = "paradigm,hr@1,hr@5,hr@10,ndcg@5,ndcg@10,entropy@10,coverage@10,decode_seconds\n";
    for (const char* p : kParadigms) {
        const auto& r = *find(p);
        const auto& m = r.metrics;
        out += r.paradigm;
        for (double v : {m.hr.at(1), m.hr.at(5), m.hr.at(10), m.ndcg.at(5), m.ndcg.at(10), m.entropy.at(10),
                         m.coverage.at(10), r.decode_seconds}) {
            out += "," + format_double(v);
        }
        out += "\n";
    }
    return out;
}

Pipeline::Pipeline(RunConfig cfg, bool force, LogLevel level)
    : cfg_(std::move(cfg)), force_(force), level_(level) {
    cfg_.data.synth.seed = cfg_.seed;
    cfg_.tokenizer.seed = stream_seed(cfg_.seed, "tokenizer");
}

fs::path
Pipeline::out(const std::string& name) const {
    return cfg_.out_dir / name;
}

void
Pipeline::log(LogLevel level, const std::string& msg) const {
    if (static_cast<int>(level) <= static_cast<int>(level_)) {
        static const char* names[] = {"error", "info", "debug"};
        std::cerr << "[semdec " << names[static_cast<int>(level)] << "] " << msg << "\n";
    }
}

bool
Pipeline::skip(const std::string& stage, const std::vector<fs::path>& outputs) const {
    if (force_) {
        return false;
    }
    for (const auto& p : outputs) {
        if (!fs::exists(p)) {
            return false;
        }
    }
    log(LogLevel::Info, stage + ": outputs exist, skipping (use --force to recompute)");
    return true;
}

void
Pipeline::record_time(const std::string& key, double seconds) {
    const auto path = out("run_metadata.json");
    ojson meta = ojson::object();
    if (fs::exists(path)) {
        try {
            meta = ojson::parse(read_text(path));
        } catch (const ojson::exception&) {
            meta = ojson::object();
        }
    }
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    meta["updated_utc"] = stamp;
    meta["seconds"][key] = seconds;
    write_text(path, meta.dump(2) + "\n");
}

void
Pipeline::tokenize() {
    const auto data_dir = out("data");
    const auto tok_dir = out("tokenizer");
    if (skip("tokenize", {data_dir / "interactions.csv", data_dir / "items.csv", data_dir / "categories.csv",
                          tok_dir / "codebooks.ckpt", tok_dir / "semantic_ids.csv"})) {
        return;
    }
    const auto t0 = Clock::now();
    run_stage("tokenize", [&] {
        Interactions inter;
        ItemVectors items;
        std::vector<std::uint32_t> categories;
        if (cfg_.data.source == "synthetic") {
            auto d = generate_synthetic(cfg_.data.synth, cfg_.threads);
            inter = std::move(d.interactions);
            items = std::move(d.items);
            categories = std::move(d.categories);
        } else {
            inter = load_interactions_csv(cfg_.data.interactions);
            items = load_item_vectors_csv(cfg_.data.item_vectors);
            if (!cfg_.data.categories.empty()) {
                categories = load_categories_csv(cfg_.data.categories);
                if (categories.size() != items.count()) {
                    throw InputError("categories cover " + std::to_string(categories.size()) +
                                     " items but there are " + std::to_string(items.count()) + " item vectors");
                }
            }
        }
        for (std::size_t u = 0; u < inter.size(); ++u) {
            for (ItemIndex i : inter.sequences[u]) {
                if (i >= items.count()) {
                    throw InputError("user " + std::to_string(inter.users[u]) + " references item " +
                                     std::to_string(i) + " but only " + std::to_string(items.count()) +
                                     " item vectors exist");
                }
            }
        }
        // Fails early on data the later stages could not split.
        leave_one_out_split(inter, cfg_.data.split);
        log(LogLevel::Info, "tokenize: " + std::to_string(items.count()) + " items, " +
                                std::to_string(inter.size()) + " users");
        const auto books = fit_residual_codebooks(items, cfg_.tokenizer);
        const auto table = assign_semantic_ids(items, books);
        validate_table(table);
        if (categories.empty()) {
            for (const auto& s : table.ids) {
                categories.push_back(s[0]);
            }
        }
        log(LogLevel::Debug, "tokenize: dedup vocabulary " + std::to_string(table.level_vocab_sizes.back()));
        save_interactions_csv(inter, data_dir / "interactions.csv");
        save_item_vectors_csv(items, data_dir / "items.csv");
        save_categories_csv(categories, data_dir / "categories.csv");
        fs::create_directories(tok_dir);
        save_codebooks(books, tok_dir / "codebooks.ckpt");
        save_semantic_ids_csv(table, tok_dir / "semantic_ids.csv");
    });
    record_time("tokenize", seconds_since(t0));
}

void
Pipeline::train() {
    std::optional<Workspace> ws;
    for (Objective obj : cfg_.train.objectives) {
        const std::string name(objective_name(obj));
        const auto ckpt = out("models/" + name + ".ckpt");
        const auto log_path = out("models/" + name + "_train_log.csv");
        if (skip("train " + name, {ckpt, log_path})) {
            continue;
        }
        const auto t0 = Clock::now();
        run_stage("train", [&] {
            if (!ws) {
                ws = load_workspace(cfg_);
            }
            auto params = ModelParams::initialize(model_config_for(cfg_, ws->table, obj));
            auto state = make_optimizer_state(params);
            std::vector<TrainExample> examples;
            for (const auto& u : ws->split.users) {
                examples.push_back({u.train});
            }
            const std::size_t bs = cfg_.train.batch_size;
            const std::size_t per_epoch = (examples.size() + bs - 1) / bs;
            AdamWConfig hyper = cfg_.train.adamw;
            hyper.total_steps = per_epoch * cfg_.train.epochs;
            std::string log_csv = "step,objective,loss\n";
            std::vector<std::size_t> order(examples.size());
            std::size_t step = 0;
            for (std::size_t epoch = 0; epoch < cfg_.train.epochs; ++epoch) {
                std::iota(order.begin(), order.end(), 0);
                auto rng = make_stream(cfg_.seed, "train.order." + name, epoch);
                std::shuffle(order.begin(), order.end(), rng);
                CompensatedSum epoch_loss;
                for (std::size_t b = 0; b < per_epoch; ++b) {
                    TrainBatch batch;
                    for (std::size_t i = b * bs; i < std::min(order.size(), (b + 1) * bs); ++i) {
                        batch.examples.push_back(examples[order[i]]);
                    }
                    const double loss = train_step(params, state, batch, obj, hyper, ws->table);
                    log_csv += std::to_string(step) + "," + name + "," + format_double(loss) + "\n";
                    epoch_loss.add(loss);
                    ++step;
                }
                log(LogLevel::Debug, "train " + name + ": epoch " + std::to_string(epoch + 1) + " mean loss " +
                                         format_short(epoch_loss.value() / static_cast<double>(per_epoch)));
            }
            log(LogLevel::Info, "train " + name + ": " + std::to_string(step) + " steps, " +
                                    std::to_string(params.parameter_count()) + " parameters");
            fs::create_directories(ckpt.parent_path());
            save_params(params, ckpt);
            write_text(log_path, log_csv);
        });
        record_time("train." + name, seconds_since(t0));
    }
}

void
Pipeline::decode() {
    std::optional<Workspace> ws;
    const std::size_t max_k = *std::max_element(cfg_.decode.ks.begin(), cfg_.decode.ks.end());
    for (Objective obj : cfg_.train.objectives) {
        const std::string name(objective_name(obj));
        const auto path = out("decode/" + name + ".csv");
        if (skip("decode " + name, {path})) {
            continue;
        }
        run_stage("decode", [&] {
            if (!ws) {
                ws = load_workspace(cfg_);
            }
            const auto params = load_params(out("models/" + name + ".ckpt"));
            const auto& users = ws->split.users;
            std::vector<ScoredList> lists(users.size());
            const auto t0 = Clock::now();
            std::optional<ItemMatrix> items;
            if (obj == Objective::SimGR) {
                items = materialize_items(params, ws->table);
            }
            parallel_for(users.size(), cfg_.threads, [&](std::size_t u) {
                const auto ctx =
                    serialize_history(params.config(), ws->table, test_history(users[u], cfg_.data.split.max_len));
                switch (obj) {
                    case Objective::Ar:
                        lists[u] = beam_search(params, ws->trie, ctx,
                                               BeamConfig{.beam_size = cfg_.decode.beam_size, .top_k = max_k});
                        break;
                    case Objective::Parallel:
                        lists[u] = parallel_decode(params, ws->trie, ctx, max_k);
                        break;
                    case Objective::SimGR:
                        lists[u] = simgr_topk(params, *items, ctx, max_k);
                        for (auto& e : lists[u].entries) {
                            e.score = std::log(e.score);
                        }
                        break;
                }
            });
            const double secs = seconds_since(t0);
            std::string csv = "user_id,rank,item_id,log_score\n";
            for (std::size_t u = 0; u < users.size(); ++u) {
                const auto& e = lists[u].entries;
                for (std::size_t r = 0; r < e.size(); ++r) {
                    csv += std::to_string(users[u].user) + "," + std::to_string(r + 1) + "," +
                           std::to_string(e[r].item) + "," + format_double(e[r].score) + "\n";
                }
            }
            write_text(path, csv);
            log(LogLevel::Info, "decode " + name + ": " + std::to_string(users.size()) + " users in " +
                                    format_short(secs) + " s");
            record_time("decode." + name, secs);
        });
    }
}

void
Pipeline::evaluate() {
    std::optional<Workspace> ws;
    for (Objective obj : cfg_.train.objectives) {
        const std::string name(objective_name(obj));
        const auto json_path = out("reports/metrics_" + name + ".json");
        const auto csv_path = out("reports/metrics_" + name + ".csv");
        if (skip("evaluate " + name, {json_path, csv_path})) {
            continue;
        }
        run_stage("evaluate", [&] {
            if (!ws) {
                ws = load_workspace(cfg_);
            }
            const auto lists = read_decode_csv(out("decode/" + name + ".csv"));
            UserTargets targets;
            for (const auto& u : ws->split.users) {
                targets[u.user] = u.test;
            }
            const auto rep =
                semdec::evaluate(lists, targets, ws->categories, ws->table.item_count(), cfg_.decode.ks, cfg_.threads);
            ojson j;
            j["paradigm"] = name;
            j["split_fingerprint"] = split_fingerprint(ws->split);
            j["metrics"] = ojson::parse(rep.to_json());
            write_text(json_path, j.dump(2) + "\n");
            write_text(csv_path, rep.to_csv());
            log(LogLevel::Info, "evaluate " + name + ": HR@" + std::to_string(rep.ks.back()) + " " +
                                    format_short(rep.hr.at(rep.ks.back())));
        });
    }
}

RunStatus
Pipeline::analyze() {
    RunStatus status;
    if (!cfg_.analysis.enabled) {
        log(LogLevel::Info, "analyze: disabled in config");
        return status;
    }
    const auto overlap_json = out("reports/overlap.json");
    const auto overlap_csv = out("reports/overlap.csv");
    const auto shift_json = out("reports/shift.json");
    const bool has_ar = std::find(cfg_.train.objectives.begin(), cfg_.train.objectives.end(), Objective::Ar) !=
                        cfg_.train.objectives.end();
    std::vector<fs::path> outputs{shift_json};
    if (has_ar) {
        outputs.push_back(overlap_json);
        outputs.push_back(overlap_csv);
    }
    auto collect = [&]() {
        // Reports on disk are the source of truth when the stage is skipped.
        if (has_ar) {
            for (const auto& c : ojson::parse(read_text(overlap_json)).at("cells")) {
                const std::string tag = "B=" + std::to_string(c.at("B").get<std::size_t>()) +
                                        " K=" + std::to_string(c.at("K").get<std::size_t>());
                if (!c.at("theorem1_holds").get<bool>()) {
                    status.violations.push_back("overlap bound " + tag);
                }
                if (!c.at("union_holds").get<bool>()) {
                    status.violations.push_back("union bound " + tag);
                }
            }
        }
        const auto shift = ojson::parse(read_text(shift_json));
        if (!shift.at("fixture").at("holds").get<bool>()) {
            status.violations.push_back("chi-square shift fixture");
        }
        for (const auto& s : shift.at("sweeps")) {
            if (s.at("violations").get<std::size_t>() != 0) {
                status.violations.push_back("chi-square shift sweep (" + s.at("item_map").get<std::string>() +
                                            ", " + std::to_string(s.at("violations").get<std::size_t>()) +
                                            " instances)");
            }
        }
    };
    if (skip("analyze", outputs)) {
        collect();
        return status;
    }
    const auto t0 = Clock::now();
    run_stage("analyze", [&] {
        if (has_ar) {
            const auto ws = load_workspace(cfg_);
            const auto params = load_params(out("models/ar.ckpt"));
            std::size_t n = ws.split.users.size();
            if (cfg_.analysis.users != 0) {
                n = std::min(n, cfg_.analysis.users);
            }
            std::vector<TokenSeq> contexts;
            std::vector<ItemIndex> targets;
            for (std::size_t u = 0; u < n; ++u) {
                const auto& us = ws.split.users[u];
                contexts.push_back(
                    serialize_history(params.config(), ws.table, test_history(us, cfg_.data.split.max_len)));
                targets.push_back(us.test);
            }
            const auto sweep = run_beam_sweep(params, ws.trie, contexts, targets, cfg_.decode.beam_sizes,
                                              cfg_.decode.ks, cfg_.threads);
            ojson j;
            j["users"] = n;
            j["leaf_count"] = ws.trie.leaf_count();
            j["cells"] = ojson::array();
            std::string csv = "B,K,mean_overlap,theorem1_upper,union_lower,joint_frequency\n";
            for (std::size_t b = 0; b < sweep.beam_sizes.size(); ++b) {
                const auto& m = sweep.marginals[b];
                for (std::size_t k = 0; k < sweep.top_ks.size(); ++k) {
                    const auto& c = sweep.cells[b][k];
                    ojson cell;
                    cell["B"] = sweep.beam_sizes[b];
                    cell["K"] = sweep.top_ks[k];
                    cell["mean_overlap"] = c.overlap.mean;
                    cell["theorem1_upper"] = c.bound.theorem1_upper;
                    cell["q"] = m.targets.q;
                    cell["union_lower"] = m.union_lower;
                    cell["joint_frequency"] = m.targets.joint_frequency;
                    cell["theorem1_holds"] = c.theorem1_holds;
                    cell["union_holds"] = m.union_holds;
                    if (cfg_.analysis.per_user) {
                        cell["per_user"] = c.overlap.per_user;
                        cell["per_user_bound"] = c.bound.per_user;
                    }
                    j["cells"].push_back(cell);
                    csv += std::to_string(sweep.beam_sizes[b]) + "," + std::to_string(sweep.top_ks[k]) + "," +
                           format_double(c.overlap.mean) + "," + format_double(c.bound.theorem1_upper) + "," +
                           format_double(m.union_lower) + "," + format_double(m.targets.joint_frequency) + "\n";
                }
            }
            write_text(overlap_json, j.dump(2) + "\n");
            write_text(overlap_csv, csv);
        } else {
            log(LogLevel::Info, "analyze: no ar model, overlap analysis skipped");
        }

        ojson shift;
        const auto fx = verify_theorem2(shift_fixture());
        shift["fixture"] = {{"chi_square", fx.chi_square},
                            {"bound", fx.bound},
                            {"witness_item", fx.witness_item},
                            {"max_term", fx.max_term},
                            {"holds", fx.holds}};
        shift["sweeps"] = ojson::array();
        if (cfg_.analysis.theorem2) {
            const std::uint64_t seed = stream_seed(cfg_.seed, "analysis.shift");
            shift["sweeps"].push_back(sweep_json(theorem2_sweep(seed, cfg_.analysis.theorem2_instances, false), false));
            if (cfg_.analysis.theorem2_many_to_one) {
                shift["sweeps"].push_back(
                    sweep_json(theorem2_sweep(seed, cfg_.analysis.theorem2_instances, true), true));
            }
        }
        write_text(shift_json, shift.dump(2) + "\n");
    });
    record_time("analyze", seconds_since(t0));
    collect();
    for (const auto& v : status.violations) {
        log(LogLevel::Error, "analyze: violated " + v);
    }
    return status;
}

void
Pipeline::compare() {
    run_stage("compare", [&] {
        std::vector<ComparisonRow> rows;
        ojson meta = ojson::object();
        if (fs::exists(out("run_metadata.json"))) {
            meta = ojson::parse(read_text(out("run_metadata.json")));
        }
        for (const char* p : kParadigms) {
            const auto path = out(std::string("reports/metrics_") + p + ".json");
            if (!fs::exists(path)) {
                continue;
            }
            const auto j = ojson::parse(read_text(path));
            ComparisonRow row;
            row.paradigm = p;
            row.metrics = metrics_from_json(j.at("metrics"));
            row.split_fingerprint = j.at("split_fingerprint").get<std::uint64_t>();
            const auto key = std::string("decode.") + p;
            if (!meta.contains("seconds") || !meta["seconds"].contains(key)) {
                throw InputError(std::string("no decode timing recorded for '") + p + "'");
            }
            row.decode_seconds = meta["seconds"][key].get<double>();
            rows.push_back(row);
        }
        write_text(out("reports/comparison.csv"), compare_paradigms(rows));
        log(LogLevel::Info, "compare: wrote reports/comparison.csv");
    });
}

void
Pipeline::begin() {
    fs::create_directories(cfg_.out_dir);
    write_text(out("resolved_config.toml"), cfg_.to_toml());
}

RunStatus
Pipeline::run_all() {
    begin();
    tokenize();
    train();
    decode();
    evaluate();
    auto status = analyze();
    const auto& objs = cfg_.train.objectives;
    const bool all_three = objs.size() >= 3 &&
                           std::find(objs.begin(), objs.end(), Objective::Ar) != objs.end() &&
                           std::find(objs.begin(), objs.end(), Objective::Parallel) != objs.end() &&
                           std::find(objs.begin(), objs.end(), Objective::SimGR) != objs.end();
    if (all_three) {
        compare();
    }
    return status;
}

}  // namespace semdec
