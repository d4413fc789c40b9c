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


#include <set>
#include <sstream>
#include <type_traits>

#include <toml.hpp>

#include "semdec/pipeline.hpp"

namespace semdec {

namespace fs = std::filesystem;

namespace {

std::string
where(const fs::path& file, const toml::source_region& src) {
    return file.string() + ":" + std::to_string(src.begin.line) + ":" + std::to_string(src.begin.column);
}

// Typed access to one TOML table that remembers which keys were consumed.
class Section {
public:
    Section(const toml::table& root, const char* name, const fs::path& file) : name_(name), file_(file) {
        if (name_.empty()) {
            table_ = &root;
            return;
        }
        const toml::node* n = root.get(name_);
        if (n != nullptr && !n->is_table()) {
            throw ConfigError(where(file_, n->source()) + ": '" + name_ + "' must be a table");
        }
        table_ = n == nullptr ? nullptr : n->as_table();
    }

    template <typename T>
    void
    get(const char* key, T& out) {
        if (table_ == nullptr) {
            return;
        }
        const toml::node* node = table_->get(key);
        if (node == nullptr) {
            return;
        }
        used_.insert(key);
        read(*node, key, out);
    }

    void
    allow(const char* key) {
        used_.insert(key);
    }

    // Unknown keys are errors so typos never fall back to defaults silently.
    void
    finish() const {
        if (table_ == nullptr) {
            return;
        }
        for (auto&& [k, v] : *table_) {
            if (!used_.contains(std::string(k.str()))) {
                throw ConfigError(where(file_, k.source()) + ": unknown key '" + qualified(k.str()) + "'");
            }
        }
    }

private:
    std::string
    qualified(std::string_view key) const {
        return name_.empty() ? std::string(key) : name_ + "." + std::string(key);
    }

    [[noreturn]] void
    fail(const toml::node& node, const char* key, const std::string& what) const {
        throw ConfigError(where(file_, node.source()) + ": '" + qualified(key) + "' " + what);
    }

    void
    read(const toml::node& node, const char* key, std::size_t& out) const {
        const auto v = node.value<std::int64_t>();
        if (!node.is_integer() || !v || *v < 0) {
            fail(node, key, "must be a non-negative integer");
        }
        out = static_cast<std::size_t>(*v);
    }
    void
    read(const toml::node& node, const char* key, double& out) const {
        if (!node.is_number()) {
            fail(node, key, "must be a number");
        }
        out = *node.value<double>();
    }
    void
    read(const toml::node& node, const char* key, bool& out) const {
        if (!node.is_boolean()) {
            fail(node, key, "must be true or false");
        }
        out = *node.value<bool>();
    }
    void
    read(const toml::node& node, const char* key, std::string& out) const {
        if (!node.is_string()) {
            fail(node, key, "must be a string");
        }
        out = *node.value<std::string>();
    }
    void
    read(const toml::node& node, const char* key, fs::path& out) const {
        std::string s;
        read(node, key, s);
        out = s;
    }
    void
    read(const toml::node& node, const char* key, std::vector<std::size_t>& out) const {
        const auto* arr = node.as_array();
        if (arr == nullptr) {
            fail(node, key, "must be an array of non-negative integers");
        }
        out.clear();
        for (const auto& el : *arr) {
            std::size_t v = 0;
            read(el, key, v);
            out.push_back(v);
        }
    }
    void
    read(const toml::node& node, const char* key, std::vector<Objective>& out) const {
        const auto* arr = node.as_array();
        if (arr == nullptr) {
            fail(node, key, "must be an array of objective names");
        }
        out.clear();
        for (const auto& el : *arr) {
            std::string v;
            read(el, key, v);
            try {
                out.push_back(parse_objective(v));
            } catch (const InputError& e) {
                fail(el, key, e.what());
            }
        }
    }
    void
    read(const toml::node& node, const char* key, AggregatorKind& out) const {
        std::string v;
        read(node, key, v);
        try {
            out = parse_aggregator(v);
        } catch (const InputError& e) {
            fail(node, key, e.what());
        }
    }

    const toml::table* table_ = nullptr;
    std::string name_;
    fs::path file_;
    std::set<std::string> used_;
};

}  // namespace

RunConfig
RunConfig::load(const fs::path& path) {
    if (!fs::is_regular_file(path)) {
        throw ConfigError(path.string() + ": config file not found");
    }
    toml::table root;
    try {
        root = toml::parse_file(path.string());
    } catch (const toml::parse_error& e) {
        throw ConfigError(where(path, e.source()) + ": " + std::string(e.description()));
    }
    RunConfig c;
    Section top(root, "", path);
    top.get("seed", c.seed);
    top.get("out_dir", c.out_dir);
    top.get("threads", c.threads);

    Section data(root, "data", path);
    auto& s = c.data.synth;
    data.get("source", c.data.source);
    data.get("interactions", c.data.interactions);
    data.get("item_vectors", c.data.item_vectors);
    data.get("categories", c.data.categories);
    data.get("n_items", s.n_items);
    data.get("n_users", s.n_users);
    data.get("dim", s.dim);
    data.get("n_categories", s.n_categories);
    data.get("cluster_spread", s.cluster_spread);
    data.get("min_seq_len", s.min_seq_len);
    data.get("max_seq_len", s.max_seq_len);
    data.get("preference_temperature", s.preference_temperature);
    data.get("drift", s.drift);
    data.get("min_interactions", c.data.split.min_interactions);
    data.get("max_len", c.data.split.max_len);

    Section tok(root, "tokenizer", path);
    tok.get("levels", c.tokenizer.levels);
    tok.get("codebook_size", c.tokenizer.codebook_size);
    tok.get("iters", c.tokenizer.iters);
    tok.get("restarts", c.tokenizer.restarts);

    Section model(root, "model", path);
    model.get("dim", c.model.dim);
    model.get("encoder_blocks", c.model.encoder_blocks);
    model.get("heads", c.model.heads);
    model.get("ff_mult", c.model.ff_mult);
    model.get("zero_init_heads", c.model.zero_init_heads);
    model.get("tau", c.model.simgr.tau);
    model.get("aggregator", c.model.simgr.aggregator);
    model.get("include_dedup", c.model.simgr.include_dedup);
    model.get("cosine", c.model.simgr.cosine);

    Section train(root, "train", path);
    train.get("objectives", c.train.objectives);
    train.get("epochs", c.train.epochs);
    train.get("batch_size", c.train.batch_size);
    train.get("lr", c.train.adamw.lr);
    train.get("beta1", c.train.adamw.beta1);
    train.get("beta2", c.train.adamw.beta2);
    train.get("eps", c.train.adamw.eps);
    train.get("weight_decay", c.train.adamw.weight_decay);
    train.get("warmup_ratio", c.train.adamw.warmup_ratio);

    Section decode(root, "decode", path);
    decode.get("beam_size", c.decode.beam_size);
    decode.get("beam_sizes", c.decode.beam_sizes);
    decode.get("ks", c.decode.ks);

    Section analysis(root, "analysis", path);
    analysis.get("enabled", c.analysis.enabled);
    analysis.get("users", c.analysis.users);
    analysis.get("per_user", c.analysis.per_user);
    analysis.get("theorem2", c.analysis.theorem2);
    analysis.get("theorem2_instances", c.analysis.theorem2_instances);
    analysis.get("theorem2_many_to_one", c.analysis.theorem2_many_to_one);

    for (const char* t : {"data", "tokenizer", "model", "train", "decode", "analysis"}) {
        top.allow(t);
    }
    for (const Section* sec : {&top, &data, &tok, &model, &train, &decode, &analysis}) {
        sec->finish();
    }
    return c;
}

void
RunConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) {
            throw ConfigError(what);
        }
    };
    require(!out_dir.empty(), "out_dir must not be empty");
    require(data.source == "synthetic" || data.source == "csv",
            "data.source must be \"synthetic\" or \"csv\", got \"" + data.source + "\"");
    if (data.source == "synthetic") {
        try {
            data.synth.validate();
        } catch (const InputError& e) {
            throw ConfigError(std::string("data: ") + e.what());
        }
    } else {
        require(!data.interactions.empty(), "data.interactions is required when data.source = \"csv\"");
        require(!data.item_vectors.empty(), "data.item_vectors is required when data.source = \"csv\"");
        require(fs::is_regular_file(data.interactions),
                "data.interactions: file not found: " + data.interactions.string());
        require(fs::is_regular_file(data.item_vectors),
                "data.item_vectors: file not found: " + data.item_vectors.string());
        require(data.categories.empty() || fs::is_regular_file(data.categories),
                "data.categories: file not found: " + data.categories.string());
    }
    require(data.split.min_interactions >= 3, "data.min_interactions must be >= 3");
    require(data.split.max_len >= 1, "data.max_len must be >= 1");
    require(tokenizer.levels >= 1, "tokenizer.levels must be >= 1");
    require(tokenizer.codebook_size >= 1, "tokenizer.codebook_size must be >= 1");
    require(tokenizer.iters >= 1, "tokenizer.iters must be >= 1");
    require(tokenizer.restarts >= 1, "tokenizer.restarts must be >= 1");
    require(model.dim >= 1, "model.dim must be >= 1");
    require(model.heads >= 1 && model.dim % model.heads == 0, "model.heads must divide model.dim");
    require(model.ff_mult >= 1, "model.ff_mult must be >= 1");
    require(model.simgr.tau > 0.0, "model.tau must be > 0");
    require(!train.objectives.empty(), "train.objectives must not be empty");
    require(train.batch_size >= 1, "train.batch_size must be >= 1");
    require(train.adamw.lr > 0.0, "train.lr must be > 0");
    require(train.adamw.warmup_ratio >= 0.0 && train.adamw.warmup_ratio <= 1.0,
            "train.warmup_ratio must be in [0, 1]");
    require(decode.beam_size >= 1, "decode.beam_size must be >= 1");
    require(!decode.beam_sizes.empty(), "decode.beam_sizes must not be empty");
    require(!decode.ks.empty(), "decode.ks must not be empty");
    for (auto b : decode.beam_sizes) {
        require(b >= 1, "decode.beam_sizes entries must be >= 1");
    }
    for (auto k : decode.ks) {
        require(k >= 1, "decode.ks entries must be >= 1");
    }
}

namespace {

std::string
list_text(const std::vector<std::size_t>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(v[i]);
    }
    return s + "]";
}

template <typename T>
std::string
toml_text(const T& v) {
    std::ostringstream os;
    os << toml::value<T>(v);
    return os.str();
}

}  // namespace

std::string
RunConfig::to_toml() const {
    std::ostringstream o;
    const auto& s = data.synth;
    const auto b = [](bool v) { return v ? "true" : "false"; };
    o << "seed = " << seed << "\n"
      << "out_dir = " << toml_text(out_dir.string()) << "\n"
      << "threads = " << threads << "\n\n"
      << "[data]\n"
      << "source = " << toml_text(data.source) << "\n"
      << "interactions = " << toml_text(data.interactions.string()) << "\n"
      << "item_vectors = " << toml_text(data.item_vectors.string()) << "\n"
      << "categories = " << toml_text(data.categories.string()) << "\n"
      << "n_items = " << s.n_items << "\n"
      << "n_users = " << s.n_users << "\n"
      << "dim = " << s.dim << "\n"
      << "n_categories = " << s.n_categories << "\n"
      << "cluster_spread = " << toml_text(s.cluster_spread) << "\n"
      << "min_seq_len = " << s.min_seq_len << "\n"
      << "max_seq_len = " << s.max_seq_len << "\n"
      << "preference_temperature = " << toml_text(s.preference_temperature) << "\n"
      << "drift = " << toml_text(s.drift) << "\n"
      << "min_interactions = " << data.split.min_interactions << "\n"
      << "max_len = " << data.split.max_len << "\n\n"
      << "[tokenizer]\n"
      << "levels = " << tokenizer.levels << "\n"
      << "codebook_size = " << tokenizer.codebook_size << "\n"
      << "iters = " << tokenizer.iters << "\n"
      << "restarts = " << tokenizer.restarts << "\n\n"
      << "[model]\n"
      << "dim = " << model.dim << "\n"
      << "encoder_blocks = " << model.encoder_blocks << "\n"
      << "heads = " << model.heads << "\n"
      << "ff_mult = " << model.ff_mult << "\n"
      << "zero_init_heads = " << b(model.zero_init_heads) << "\n"
      << "tau = " << toml_text(model.simgr.tau) << "\n"
      << "aggregator = " << toml_text(std::string(aggregator_name(model.simgr.aggregator))) << "\n"
      << "include_dedup = " << b(model.simgr.include_dedup) << "\n"
      << "cosine = " << b(model.simgr.cosine) << "\n\n"
      << "[train]\n"
      << "objectives = [";
    for (std::size_t i = 0; i < train.objectives.size(); ++i) {
        o << (i ? ", " : "") << toml_text(std::string(objective_name(train.objectives[i])));
    }
    o << "]\n"
      << "epochs = " << train.epochs << "\n"
      << "batch_size = " << train.batch_size << "\n"
      << "lr = " << toml_text(train.adamw.lr) << "\n"
      << "beta1 = " << toml_text(train.adamw.beta1) << "\n"
      << "beta2 = " << toml_text(train.adamw.beta2) << "\n"
      << "eps = " << toml_text(train.adamw.eps) << "\n"
      << "weight_decay = " << toml_text(train.adamw.weight_decay) << "\n"
      << "warmup_ratio = " << toml_text(train.adamw.warmup_ratio) << "\n\n"
      << "[decode]\n"
      << "beam_size = " << decode.beam_size << "\n"
      << "beam_sizes = " << list_text(decode.beam_sizes) << "\n"
      << "ks = " << list_text(decode.ks) << "\n\n"
      << "[analysis]\n"
      << "enabled = " << b(analysis.enabled) << "\n"
      << "users = " << analysis.users << "\n"
      << "per_user = " << b(analysis.per_user) << "\n"
      << "theorem2 = " << b(analysis.theorem2) << "\n"
      << "theorem2_instances = " << analysis.theorem2_instances << "\n"
      << "theorem2_many_to_one = " << b(analysis.theorem2_many_to_one) << "\n";
    return o.str();
}

}  // namespace semdec
