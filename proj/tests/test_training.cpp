#include "lsh/training.hpp"

#include "lsh/errors.hpp"
#include "lsh/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

using namespace lsh;

namespace {

// structured text (a tiny word vocabulary) so a char model has something
// to learn beyond unigram frequencies
Corpus toy_corpus(long length, uint64_t seed) {
    static const char* words[] = {"the", "cat", "sat", "on", "a", "mat", "dog", "ran"};
    Rng rng(seed);
    std::string text;
    while (static_cast<long>(text.size()) < length) {
        text += words[rng.below(8)];
        text.push_back(' ');
    }
    text.resize(static_cast<size_t>(length));
    return corpus_from_text(text, Tokenization::chars);
}

ModelProfile small_profile(Arch arch, Index vocab, bool tied = false, bool coupled = false) {
    ModelProfile p;
    p.arch = arch;
    p.vocab = vocab;
    p.hidden = 4;
    p.embedding = 4;
    p.layers = 2;
    p.tied = tied;
    p.coupled = coupled;
    return p;
}

CandidateConfig candidate(uint64_t seed) {
    CandidateConfig c;
    c.id = "c0001";
    c.seed = seed;
    c.death_rate = 0.5;
    return c;
}

std::vector<double> flatten_params(SparseModel& model) {
    auto refs = collect_params(model);
    std::vector<double> out;
    for (const Mat* m : refs.mats)
        for (Index i = 0; i < m->size(); ++i) out.push_back(*(m->data() + i));
    for (const Vec* v : refs.vecs)
        for (Index i = 0; i < v->size(); ++i) out.push_back((*v)(i));
    return out;
}

// walks the flattened coordinate through mats (storage order) then vecs
void add_at(SparseModel& model, size_t idx, double delta) {
    auto refs = collect_params(model);
    for (Mat* m : refs.mats) {
        if (idx < static_cast<size_t>(m->size())) {
            *(m->data() + static_cast<Index>(idx)) += delta;
            return;
        }
        idx -= static_cast<size_t>(m->size());
    }
    for (Vec* v : refs.vecs) {
        if (idx < static_cast<size_t>(v->size())) {
            (*v)(static_cast<Index>(idx)) += delta;
            return;
        }
        idx -= static_cast<size_t>(v->size());
    }
}

// central finite differences of evaluate_loss w.r.t. single parameter
// entries, against gradients recovered from one SGD step
void check_gradients(SparseModel model, const BatchSet& batches) {
    const double lr = 1.0;
    SparseModel stepped = model;
    OptimizerState opt;
    opt.lr = lr;
    opt.clip = 1e9;  // disable clipping for the check
    train_epoch(stepped, batches, opt);

    auto before = flatten_params(model);
    auto after = flatten_params(stepped);

    Rng rng(12345);
    for (int probe = 0; probe < 40; ++probe) {
        size_t idx = static_cast<size_t>(rng.below(before.size()));
        double analytic = (before[idx] - after[idx]) / lr;

        const double eps = 1e-6;
        auto perturbed_loss = [&](double delta) {
            SparseModel copy = model;
            add_at(copy, idx, delta);
            return evaluate_loss(copy, batches);
        };
        double numeric = (perturbed_loss(eps) - perturbed_loss(-eps)) / (2.0 * eps);
        CHECK(analytic == doctest::Approx(numeric).epsilon(1e-4).scale(1.0));
    }
}

}  // namespace

TEST_CASE("ntasgd_trigger") {
    CHECK_FALSE(ntasgd_trigger({3, 2, 1}, 5));
    CHECK_FALSE(ntasgd_trigger({5, 4, 3, 2, 1}, 5));
    CHECK(ntasgd_trigger({3, 2, 1, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6}, 5));
    CHECK_FALSE(ntasgd_trigger({3, 2, 1, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4}, 5));
    CHECK_FALSE(ntasgd_trigger({}, 5));
}

TEST_CASE("train_epoch: learning rate 0 leaves parameters unchanged") {
    auto corpus = toy_corpus(300, 1);
    auto splits = split_corpus(corpus, 0.8, 0.1);
    auto batches = make_batches(splits.train, 4, 8);
    auto model = init_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()),
                            candidate(7), 0.5);
    auto before = flatten_params(model);
    OptimizerState opt;
    opt.lr = 0.0;
    double train_loss = train_epoch(model, batches, opt);
    auto after = flatten_params(model);
    CHECK(before == after);
    CHECK(train_loss == doctest::Approx(evaluate_loss(model, batches)).epsilon(1e-12));
}

TEST_CASE("train_epoch: gradient check against finite differences (lstm)") {
    auto corpus = toy_corpus(120, 2);
    auto splits = split_corpus(corpus, 0.8, 0.1);
    auto batches = make_batches(splits.train, 2, 6);
    // single block keeps the one-step delta equal to the loss gradient
    batches.blocks.resize(1);
    auto model = init_dense_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()), 3);
    check_gradients(model, batches);
}

TEST_CASE("train_epoch: gradient check against finite differences (rhn, coupled, tied)") {
    auto corpus = toy_corpus(120, 4);
    auto splits = split_corpus(corpus, 0.8, 0.1);
    auto batches = make_batches(splits.train, 2, 6);
    batches.blocks.resize(1);
    auto model =
        init_dense_model(small_profile(Arch::rhn, corpus.vocab_size(), true, true), 5);
    check_gradients(model, batches);
}

TEST_CASE("train_epoch: gradient check against finite differences (rhn, uncoupled)") {
    auto corpus = toy_corpus(120, 6);
    auto splits = split_corpus(corpus, 0.8, 0.1);
    auto batches = make_batches(splits.train, 2, 6);
    batches.blocks.resize(1);
    auto model =
        init_dense_model(small_profile(Arch::rhn, corpus.vocab_size(), false, false), 8);
    check_gradients(model, batches);
}

TEST_CASE("train_epoch: loss decreases over the first five epochs, 3 of 3 seeds") {
    for (uint64_t seed : {11ull, 22ull, 33ull}) {
        auto corpus = toy_corpus(200, seed);
        auto batches = make_batches(corpus.ids, 4, 8);
        ModelProfile profile = small_profile(Arch::stacked_lstm, corpus.vocab_size());
        profile.hidden = 32;
        profile.embedding = 32;
        auto model = init_model(profile, candidate(seed), 0.3);
        OptimizerState opt;
        opt.lr = 2.0;
        std::vector<double> losses;
        for (int epoch = 0; epoch < 5; ++epoch) {
            losses.push_back(train_epoch(model, batches, opt));
        }
        for (size_t i = 1; i < losses.size(); ++i) CHECK(losses[i] < losses[i - 1]);
    }
}

TEST_CASE("train_epoch: masked positions stay exactly zero") {
    auto corpus = toy_corpus(400, 9);
    auto batches = make_batches(corpus.ids, 4, 8);
    auto model = init_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()),
                            candidate(13), 0.6);
    OptimizerState opt;
    opt.lr = 1.0;
    for (int epoch = 0; epoch < 3; ++epoch) {
        train_epoch(model, batches, opt);
        auto refs = collect_params(model);
        for (size_t i = 0; i < refs.prunable_count; ++i) {
            Mat masked_out = refs.mats[i]->cwiseProduct(
                (1.0 - model.masks.layers[i].array()).matrix());
            CHECK(masked_out.cwiseAbs().maxCoeff() == 0.0);
        }
        // prune-regrow keeps the invariant through mask churn
        prune_regrow_cycle(model, 0.3, 100 + static_cast<uint64_t>(epoch));
        long nnz = model.masks.total_nonzeros();
        CHECK(nnz == model.masks.total_nonzeros());
    }
}

TEST_CASE("train_epoch: gradient clipping bounds the update step") {
    auto corpus = toy_corpus(300, 15);
    auto batches = make_batches(corpus.ids, 4, 8);
    batches.blocks.resize(1);
    auto model = init_dense_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()), 17);
    OptimizerState opt;
    opt.lr = 1.0;
    opt.clip = 0.01;
    auto before = flatten_params(model);
    train_epoch(model, batches, opt);
    auto after = flatten_params(model);
    double sq = 0.0;
    for (size_t i = 0; i < before.size(); ++i) {
        double d = after[i] - before[i];
        sq += d * d;
    }
    // ||update|| = lr * ||clipped grad|| <= lr * clip
    CHECK(std::sqrt(sq) <= opt.lr * opt.clip + 1e-12);
}

TEST_CASE("train_epoch: diverged loss raises with batch index") {
    auto corpus = toy_corpus(300, 19);
    auto batches = make_batches(corpus.ids, 4, 8);
    auto model = init_dense_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()), 21);
    // poison the head so the first block's loss is non-finite
    model.decoder_b(0) = std::numeric_limits<double>::infinity();
    OptimizerState opt;
    bool threw = false;
    try {
        train_epoch(model, batches, opt);
    } catch (const DivergedError& e) {
        threw = true;
        CHECK(e.batch_index == 0);
    }
    CHECK(threw);
}

TEST_CASE("evaluate_perplexity: uniform logits give perplexity = vocab size") {
    auto corpus = toy_corpus(300, 23);
    auto batches = make_batches(corpus.ids, 4, 8);
    auto model = init_dense_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()), 25);
    auto refs = collect_params(model);
    for (Mat* m : refs.mats) m->setZero();
    for (Vec* v : refs.vecs) v->setZero();
    double ppl = evaluate_perplexity(model, batches);
    CHECK(ppl == doctest::Approx(static_cast<double>(corpus.vocab_size())).epsilon(1e-6));
}

TEST_CASE("evaluate_perplexity: deterministic corpus trains to near 1") {
    std::string text;
    for (int i = 0; i < 300; ++i) text += "ab";
    auto corpus = corpus_from_text(text, Tokenization::chars);
    auto batches = make_batches(corpus.ids, 4, 8);
    ModelProfile profile = small_profile(Arch::stacked_lstm, corpus.vocab_size());
    profile.hidden = 16;
    profile.embedding = 16;
    auto model = init_dense_model(profile, 27);
    OptimizerState opt;
    opt.lr = 2.0;
    for (int epoch = 0; epoch < 40; ++epoch) train_epoch(model, batches, opt);
    CHECK(evaluate_perplexity(model, batches) < 1.1);
}

TEST_CASE("evaluate_perplexity: side-effect free, >= 1, honors averaging") {
    auto corpus = toy_corpus(300, 29);
    auto batches = make_batches(corpus.ids, 4, 8);
    auto model = init_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()),
                            candidate(31), 0.4);
    auto before = flatten_params(model);
    double a = evaluate_perplexity(model, batches);
    double b = evaluate_perplexity(model, batches);
    CHECK(a == b);
    CHECK(a >= 1.0);
    CHECK(before == flatten_params(model));

    // averaging swaps in the accumulator for evaluation only
    OptimizerState opt;
    opt.lr = 0.5;
    opt.nonmono = 1;
    train_epoch(model, batches, opt);
    opt.observe_val_loss(1.0);
    opt.observe_val_loss(2.0);  // triggers
    CHECK(opt.averaging_active);
    train_epoch(model, batches, opt);
    double with_avg = evaluate_perplexity(model, batches, &opt);
    CHECK(with_avg >= 1.0);
}

TEST_CASE("train_epoch: same seed gives an identical loss trajectory") {
    auto corpus = toy_corpus(400, 44);
    auto batches = make_batches(corpus.ids, 4, 8);
    auto run = [&] {
        auto model = init_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()),
                                candidate(555), 0.5);
        OptimizerState opt(derive_seed(555, "dropout"));
        opt.lr = 1.0;
        std::vector<double> losses;
        for (int e = 0; e < 3; ++e) {
            losses.push_back(train_epoch(model, batches, opt));
            prune_regrow_cycle(model, 0.3, derive_seed(555, "regrow", static_cast<uint64_t>(e)));
        }
        return losses;
    };
    CHECK(run() == run());
}

TEST_CASE("prune_regrow_cycle: bit-identical mask evolution per seed") {
    auto corpus = toy_corpus(400, 46);
    auto batches = make_batches(corpus.ids, 4, 8);
    auto evolve = [&] {
        auto model = init_model(small_profile(Arch::stacked_lstm, corpus.vocab_size()),
                                candidate(77), 0.6);
        OptimizerState opt;
        opt.lr = 1.0;
        for (int e = 0; e < 3; ++e) {
            train_epoch(model, batches, opt);
            prune_regrow_cycle(model, 0.4, derive_seed(77, "regrow", static_cast<uint64_t>(e)));
        }
        return model.masks;
    };
    auto a = evolve();
    auto b = evolve();
    for (size_t l = 0; l < a.layers.size(); ++l) {
        CHECK((a.layers[l] - b.layers[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}
