#include "lsh/model.hpp"

#include "lsh/errors.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace lsh;

namespace {

ModelProfile profile_for(Arch arch, bool tied = false, bool coupled = false) {
    ModelProfile p;
    p.arch = arch;
    p.vocab = 11;
    p.hidden = 6;
    p.embedding = 6;
    p.layers = 2;
    p.tied = tied;
    p.coupled = coupled;
    return p;
}

bool models_identical(SparseModel& a, SparseModel& b) {
    auto ra = collect_params(a);
    auto rb = collect_params(b);
    if (ra.mats.size() != rb.mats.size() || ra.vecs.size() != rb.vecs.size()) return false;
    for (size_t i = 0; i < ra.mats.size(); ++i) {
        if (ra.mats[i]->rows() != rb.mats[i]->rows()) return false;
        if ((*ra.mats[i] - *rb.mats[i]).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    for (size_t i = 0; i < ra.vecs.size(); ++i) {
        if ((*ra.vecs[i] - *rb.vecs[i]).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    if (a.masks.layers.size() != b.masks.layers.size()) return false;
    for (size_t i = 0; i < a.masks.layers.size(); ++i) {
        if ((a.masks.layers[i] - b.masks.layers[i]).cwiseAbs().maxCoeff() != 0.0) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("init_model: masked positions start at zero, budget respected") {
    CandidateConfig config;
    config.id = "c0000";
    config.seed = 99;
    config.init_mode = InitMode::er;
    auto model = init_model(profile_for(Arch::stacked_lstm), config, 0.67);
    auto refs = collect_params(model);
    long budget = std::lround(0.33 * static_cast<double>(model.masks.total_weights()));
    CHECK(model.masks.total_nonzeros() == budget);
    for (size_t i = 0; i < refs.prunable_count; ++i) {
        Mat off = refs.mats[i]->cwiseProduct((1.0 - model.masks.layers[i].array()).matrix());
        CHECK(off.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("checkpoint: bit-exact round trip for every architecture variant") {
    CandidateConfig config;
    config.id = "c0042";
    config.seed = 1234;
    config.death_mode = DeathMode::set;
    config.redist_mode = RedistMode::nonzeros;
    config.death_rate = 0.73;

    int counter = 0;
    for (auto arch : {Arch::stacked_lstm, Arch::rhn}) {
        for (bool coupled : {false, true}) {
            if (arch == Arch::stacked_lstm && coupled) continue;
            auto profile = profile_for(arch, arch == Arch::rhn, coupled);
            auto model = init_model(profile, config, 0.5);
            std::string path = "/tmp/lsh_ckpt_" + std::to_string(counter++) + ".bin";
            save_checkpoint(model, path);
            auto loaded = load_checkpoint(path);
            CHECK(models_identical(model, loaded));
            CHECK(loaded.profile.arch == profile.arch);
            CHECK(loaded.config.id == config.id);
            CHECK(loaded.config.death_rate == config.death_rate);
            CHECK(loaded.masks.global_sparsity == 0.5);
            std::remove(path.c_str());
        }
    }
}

TEST_CASE("checkpoint: rejects garbage and truncation") {
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), IoError);
    std::string path = "/tmp/lsh_ckpt_bad.bin";
    {
        std::ofstream out(path, std::ios::binary);
        out << "definitely not a checkpoint";
    }
    CHECK_THROWS_AS(load_checkpoint(path), InvalidDataError);

    auto model = init_dense_model(profile_for(Arch::stacked_lstm), 5);
    save_checkpoint(model, path);
    // truncate
    std::filesystem::resize_file(path, 200);
    CHECK_THROWS_AS(load_checkpoint(path), Error);
    std::remove(path.c_str());
}

TEST_CASE("model profile validation") {
    ModelProfile p = profile_for(Arch::stacked_lstm, true);
    p.embedding = 5;  // tied requires embedding == hidden
    CHECK_THROWS_AS(init_dense_model(p, 1), InvalidArgumentError);
    ModelProfile q = profile_for(Arch::stacked_lstm);
    q.coupled = true;
    CHECK_THROWS_AS(init_dense_model(q, 1), InvalidArgumentError);
}
