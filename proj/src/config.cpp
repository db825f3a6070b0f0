#include "lsh/config.hpp"

#include "lsh/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <thread>

namespace lsh {

using json = nlohmann::ordered_json;

const char* to_string(SamplerKind k) {
    switch (k) {
        case SamplerKind::tpe: return "tpe";
        case SamplerKind::random_search: return "random";
        case SamplerKind::grid: return "grid";
    }
    return "?";
}

const char* to_string(Criterion c) {
    return c == Criterion::ls_distance ? "ls_distance" : "val_loss";
}

SamplerKind sampler_from_string(const std::string& s) {
    if (s == "tpe") return SamplerKind::tpe;
    if (s == "random") return SamplerKind::random_search;
    if (s == "grid") return SamplerKind::grid;
    throw ConfigError("search.sampler: '" + s + "' not in {tpe, random, grid}");
}

Criterion criterion_from_string(const std::string& s) {
    if (s == "ls_distance") return Criterion::ls_distance;
    if (s == "val_loss") return Criterion::val_loss;
    throw ConfigError("search.criterion: '" + s + "' not in {ls_distance, val_loss}");
}

long RunConfig::resolved_pool() const {
    if (budget.empty()) return pool;
    if (budget == "low") return 24;
    if (budget == "moderate") return 30;
    if (budget == "high") return 40;
    throw ConfigError("search.budget: '" + budget + "' not in {low, moderate, high}");
}

long RunConfig::resolved_decay_horizon() const {
    return decay_horizon > 0 ? decay_horizon : extensive_epochs;
}

long RunConfig::resolved_workers() const {
    if (workers > 0) return workers;
    long hw = static_cast<long>(std::thread::hardware_concurrency());
    return hw > 0 ? hw : 1;
}

ModelProfile RunConfig::model_profile(Index vocab) const {
    ModelProfile p;
    p.arch = arch;
    p.vocab = vocab;
    p.hidden = hidden;
    p.embedding = embedding;
    p.layers = layers;
    p.tied = tied;
    p.coupled = coupled;
    p.dropout_output = dropout_output;
    return p;
}

namespace {

void reject_unknown(const json& obj, const std::string& section,
                    const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown config key: " +
                              (section.empty() ? it.key() : section + "." + it.key()));
        }
    }
}

template <class T>
void read_field(const json& obj, const std::string& section, const std::string& key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field " + (section.empty() ? key : section + "." + key) +
                          " has the wrong type");
    }
}

RunConfig from_json(const json& root) {
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    reject_unknown(root, "", {"corpus", "model", "sparsity", "optimizer", "ls", "search",
                              "reference", "seed", "out_dir"});
    RunConfig c;

    if (root.contains("corpus")) {
        const auto& s = root.at("corpus");
        reject_unknown(s, "corpus", {"path", "tokenization", "train_frac", "val_frac"});
        read_field(s, "corpus", "path", c.corpus_path);
        std::string tok = to_string(c.tokenization);
        read_field(s, "corpus", "tokenization", tok);
        c.tokenization = tokenization_from_string(tok);
        read_field(s, "corpus", "train_frac", c.train_frac);
        read_field(s, "corpus", "val_frac", c.val_frac);
    }
    if (root.contains("model")) {
        const auto& s = root.at("model");
        reject_unknown(s, "model",
                       {"arch", "hidden", "embedding", "layers", "tied", "coupled",
                        "dropout_output"});
        std::string arch = to_string(c.arch);
        read_field(s, "model", "arch", arch);
        c.arch = arch_from_string(arch);
        read_field(s, "model", "hidden", c.hidden);
        read_field(s, "model", "embedding", c.embedding);
        read_field(s, "model", "layers", c.layers);
        read_field(s, "model", "tied", c.tied);
        read_field(s, "model", "coupled", c.coupled);
        read_field(s, "model", "dropout_output", c.dropout_output);
    }
    if (root.contains("sparsity")) read_field(root, "", "sparsity", c.sparsity);
    if (root.contains("optimizer")) {
        const auto& s = root.at("optimizer");
        reject_unknown(s, "optimizer", {"lr", "clip", "nonmono", "batch_size", "bptt"});
        read_field(s, "optimizer", "lr", c.lr);
        read_field(s, "optimizer", "clip", c.clip);
        read_field(s, "optimizer", "nonmono", c.nonmono);
        read_field(s, "optimizer", "batch_size", c.batch_size);
        read_field(s, "optimizer", "bptt", c.bptt);
    }
    if (root.contains("ls")) {
        const auto& s = root.at("ls");
        reject_unknown(s, "ls", {"samples", "steps", "warmup"});
        read_field(s, "ls", "samples", c.ls_samples);
        read_field(s, "ls", "steps", c.ls_steps);
        read_field(s, "ls", "warmup", c.ls_warmup);
    }
    if (root.contains("search")) {
        const auto& s = root.at("search");
        reject_unknown(s, "search",
                       {"pool", "budget", "epochs_per_event", "selection_epochs", "final_k",
                        "sampler", "criterion", "embedding", "metric", "grid_death_rate",
                        "extensive_epochs", "decay_horizon", "workers", "death_rate_min",
                        "death_rate_max"});
        read_field(s, "search", "pool", c.pool);
        read_field(s, "search", "budget", c.budget);
        read_field(s, "search", "epochs_per_event", c.epochs_per_event);
        read_field(s, "search", "selection_epochs", c.selection_epochs);
        read_field(s, "search", "final_k", c.final_k);
        std::string sampler = to_string(c.sampler);
        read_field(s, "search", "sampler", sampler);
        c.sampler = sampler_from_string(sampler);
        std::string criterion = to_string(c.criterion);
        read_field(s, "search", "criterion", criterion);
        c.criterion = criterion_from_string(criterion);
        std::string embedding = to_string(c.embed_method);
        read_field(s, "search", "embedding", embedding);
        c.embed_method = embed_method_from_string(embedding);
        std::string metric = to_string(c.metric);
        read_field(s, "search", "metric", metric);
        c.metric = metric_from_string(metric);
        read_field(s, "search", "grid_death_rate", c.grid_death_rate);
        read_field(s, "search", "extensive_epochs", c.extensive_epochs);
        read_field(s, "search", "decay_horizon", c.decay_horizon);
        read_field(s, "search", "workers", c.workers);
        read_field(s, "search", "death_rate_min", c.death_rate_min);
        read_field(s, "search", "death_rate_max", c.death_rate_max);
    }
    if (root.contains("reference")) {
        const auto& s = root.at("reference");
        reject_unknown(s, "reference", {"checkpoint", "train_if_missing", "seed", "max_epochs"});
        read_field(s, "reference", "checkpoint", c.reference_checkpoint);
        read_field(s, "reference", "train_if_missing", c.train_reference);
        read_field(s, "reference", "seed", c.reference_seed);
        read_field(s, "reference", "max_epochs", c.reference_max_epochs);
    }
    read_field(root, "", "seed", c.seed);
    read_field(root, "", "out_dir", c.out_dir);
    return c;
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(root);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json([&] {
        try {
            return json::parse(text);
        } catch (const json::exception& e) {
            throw ConfigError(path + " is not valid JSON: " + e.what());
        }
    }());
}

void apply_override(RunConfig& config, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("--set expects key.path=value, got: " + assignment);
    }
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    // rebuild through the JSON parser so type checks and key validation
    // apply to overrides exactly as to the file
    json root = json::parse(to_json_text(config));
    json* node = &root;
    size_t start = 0;
    for (;;) {
        size_t dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (dot == std::string::npos) {
            json parsed;
            try {
                parsed = json::parse(value);
            } catch (const json::exception&) {
                parsed = value;  // bare strings need no quotes
            }
            (*node)[key] = parsed;
            break;
        }
        if (!node->contains(key)) (*node)[key] = json::object();
        node = &(*node)[key];
        start = dot + 1;
    }
    config = from_json(root);
}

void validate(const RunConfig& c) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (c.corpus_path.empty()) fail("corpus.path: required (path to a UTF-8 text file)");
    if (!(c.train_frac > 0.0 && c.val_frac > 0.0 && c.train_frac + c.val_frac < 1.0)) {
        fail("corpus.train_frac/val_frac: must be positive with sum < 1");
    }
    if (c.hidden < 1) fail("model.hidden: must be >= 1");
    if (c.embedding < 1) fail("model.embedding: must be >= 1");
    if (c.layers < 1) fail("model.layers: must be >= 1");
    if (c.tied && c.embedding != c.hidden) {
        fail("model.tied: requires model.embedding == model.hidden");
    }
    if (c.coupled && c.arch != Arch::rhn) fail("model.coupled: applies to arch rhn only");
    if (!(c.dropout_output >= 0.0 && c.dropout_output < 1.0)) {
        fail("model.dropout_output: must be in [0, 1)");
    }
    if (!(c.sparsity >= 0.0 && c.sparsity < 1.0)) fail("sparsity: must be in [0, 1)");
    if (!(c.lr > 0.0) && c.lr != 0.0) fail("optimizer.lr: must be >= 0");
    if (!(c.clip > 0.0)) fail("optimizer.clip: must be > 0");
    if (c.nonmono < 1) fail("optimizer.nonmono: must be >= 1");
    if (c.batch_size < 1) fail("optimizer.batch_size: must be >= 1");
    if (c.bptt < 1) fail("optimizer.bptt: must be >= 1");
    if (c.ls_samples < 1) fail("ls.samples: must be >= 1");
    if (c.ls_steps < 1) fail("ls.steps: must be >= 1");
    if (!(c.ls_warmup >= 0 && c.ls_warmup < c.ls_steps)) {
        fail("ls.warmup: must be in [0, ls.steps)");
    }
    if (!c.budget.empty() && c.budget != "low" && c.budget != "moderate" &&
        c.budget != "high") {
        fail("search.budget: '" + c.budget + "' not in {low, moderate, high}");
    }
    if (c.budget.empty() && c.pool < 1) fail("search.pool: must be >= 1");
    if (c.epochs_per_event < 1) fail("search.epochs_per_event: must be >= 1");
    if (c.selection_epochs < c.epochs_per_event) {
        fail("search.selection_epochs: must be >= search.epochs_per_event");
    }
    if (c.final_k < 1) fail("search.final_k: must be >= 1");
    if (!(c.grid_death_rate >= c.death_rate_min && c.grid_death_rate <= c.death_rate_max)) {
        fail("search.grid_death_rate: must be within the death-rate bounds");
    }
    if (c.extensive_epochs < 1) fail("search.extensive_epochs: must be >= 1");
    if (c.decay_horizon < 0) fail("search.decay_horizon: must be >= 0 (0 = auto)");
    if (c.workers < 0) fail("search.workers: must be >= 0 (0 = hardware)");
    if (!(c.death_rate_min >= 0.0 && c.death_rate_max <= 1.0 &&
          c.death_rate_min < c.death_rate_max)) {
        fail("search.death_rate_min/max: need 0 <= min < max <= 1");
    }
    if (c.reference_max_epochs < 1) fail("reference.max_epochs: must be >= 1");
    if (c.out_dir.empty()) fail("out_dir: required");
}

std::string to_json_text(const RunConfig& c) {
    json root;
    root["corpus"] = {{"path", c.corpus_path},
                      {"tokenization", to_string(c.tokenization)},
                      {"train_frac", c.train_frac},
                      {"val_frac", c.val_frac}};
    root["model"] = {{"arch", to_string(c.arch)},
                     {"hidden", c.hidden},
                     {"embedding", c.embedding},
                     {"layers", c.layers},
                     {"tied", c.tied},
                     {"coupled", c.coupled},
                     {"dropout_output", c.dropout_output}};
    root["sparsity"] = c.sparsity;
    root["optimizer"] = {{"lr", c.lr},
                         {"clip", c.clip},
                         {"nonmono", c.nonmono},
                         {"batch_size", c.batch_size},
                         {"bptt", c.bptt}};
    root["ls"] = {{"samples", c.ls_samples}, {"steps", c.ls_steps}, {"warmup", c.ls_warmup}};
    root["search"] = {{"pool", c.pool},
                      {"budget", c.budget},
                      {"epochs_per_event", c.epochs_per_event},
                      {"selection_epochs", c.selection_epochs},
                      {"final_k", c.final_k},
                      {"sampler", to_string(c.sampler)},
                      {"criterion", to_string(c.criterion)},
                      {"embedding", to_string(c.embed_method)},
                      {"metric", to_string(c.metric)},
                      {"grid_death_rate", c.grid_death_rate},
                      {"extensive_epochs", c.extensive_epochs},
                      {"decay_horizon", c.decay_horizon},
                      {"workers", c.workers},
                      {"death_rate_min", c.death_rate_min},
                      {"death_rate_max", c.death_rate_max}};
    root["reference"] = {{"checkpoint", c.reference_checkpoint},
                         {"train_if_missing", c.train_reference},
                         {"seed", c.reference_seed},
                         {"max_epochs", c.reference_max_epochs}};
    root["seed"] = c.seed;
    root["out_dir"] = c.out_dir;
    return root.dump(2) + "\n";
}

}  // namespace lsh
