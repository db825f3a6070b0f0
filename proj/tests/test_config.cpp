#include "lsh/config.hpp"

#include "lsh/errors.hpp"

#include <doctest.h>

#include <string>

using namespace lsh;

TEST_CASE("config: defaults parse and validate") {
    auto config = run_config_from_json_text(R"({"corpus": {"path": "data/corpus.txt"}})");
    CHECK(config.hidden == 64);
    CHECK(config.sampler == SamplerKind::tpe);
    CHECK(config.criterion == Criterion::ls_distance);
    CHECK(config.embed_method == EmbedMethod::pca);
    CHECK(config.metric == Metric::l2);
    CHECK(config.ls_samples == 2);
    CHECK(config.nonmono == 5);
    CHECK(config.clip == 0.25);
    CHECK(config.bptt == 35);
    CHECK(config.batch_size == 20);
    CHECK(config.death_rate_min == 0.4);
    CHECK(config.death_rate_max == 0.9);
    validate(config);
}

TEST_CASE("config: unknown keys are rejected by name") {
    bool threw = false;
    try {
        run_config_from_json_text(R"({"corpus": {"path": "x"}, "serach": {}})");
    } catch (const ConfigError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("serach") != std::string::npos);
    }
    CHECK(threw);

    CHECK_THROWS_AS(
        run_config_from_json_text(R"({"corpus": {"path": "x", "tokenisation": "char"}})"),
        ConfigError);
}

TEST_CASE("config: enum domains produce errors naming the allowed values") {
    bool threw = false;
    try {
        run_config_from_json_text(
            R"({"corpus": {"path": "x"}, "search": {"sampler": "bayes"}})");
    } catch (const ConfigError& e) {
        threw = true;
        std::string msg = e.what();
        CHECK(msg.find("tpe") != std::string::npos);
        CHECK(msg.find("grid") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("config: validation names the offending field") {
    auto config = run_config_from_json_text(R"({"corpus": {"path": "x"}})");
    config.sparsity = 1.5;
    bool threw = false;
    try {
        validate(config);
    } catch (const ConfigError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("sparsity") != std::string::npos);
    }
    CHECK(threw);

    config.sparsity = 0.5;
    config.tied = true;
    config.embedding = 32;
    CHECK_THROWS_AS(validate(config), ConfigError);

    config.embedding = config.hidden;
    config.selection_epochs = 1;
    config.epochs_per_event = 2;
    CHECK_THROWS_AS(validate(config), ConfigError);
}

TEST_CASE("config: budget tiers map to pool sizes") {
    auto config = run_config_from_json_text(
        R"({"corpus": {"path": "x"}, "search": {"budget": "moderate"}})");
    CHECK(config.resolved_pool() == 30);
    config.budget = "low";
    CHECK(config.resolved_pool() == 24);
    config.budget = "high";
    CHECK(config.resolved_pool() == 40);
    config.budget = "";
    config.pool = 13;
    CHECK(config.resolved_pool() == 13);
}

TEST_CASE("config: --set overrides reuse the schema validation") {
    auto config = run_config_from_json_text(R"({"corpus": {"path": "x"}})");
    apply_override(config, "search.pool=24");
    CHECK(config.pool == 24);
    apply_override(config, "model.arch=rhn");
    CHECK(config.arch == Arch::rhn);
    apply_override(config, "optimizer.lr=0.5");
    CHECK(config.lr == 0.5);
    apply_override(config, "corpus.tokenization=word");
    CHECK(config.tokenization == Tokenization::words);

    CHECK_THROWS_AS(apply_override(config, "search.nonsense=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(config, "no_equals_sign"), ConfigError);
    CHECK_THROWS_AS(apply_override(config, "search.sampler=bogus"), ConfigError);
}

TEST_CASE("config: round-trips through its own JSON text") {
    auto config = run_config_from_json_text(R"({"corpus": {"path": "data/corpus.txt"}})");
    config.pool = 17;
    config.metric = Metric::cosine;
    config.seed = 424242;
    auto back = run_config_from_json_text(to_json_text(config));
    CHECK(back.pool == 17);
    CHECK(back.metric == Metric::cosine);
    CHECK(back.seed == 424242);
    CHECK(to_json_text(back) == to_json_text(config));
}

TEST_CASE("config: shipped profiles parse and validate") {
    for (const char* name :
         {"desk_lstm.json", "desk_rhn.json", "paper_lstm.json", "paper_rhn.json"}) {
        auto config = load_run_config(std::string(LSH_SOURCE_DIR) + "/configs/" + name);
        CHECK_NOTHROW(validate(config));
    }
    auto rhn = load_run_config(std::string(LSH_SOURCE_DIR) + "/configs/desk_rhn.json");
    CHECK(rhn.arch == Arch::rhn);
    CHECK(rhn.tied);
    CHECK(rhn.coupled);
}
