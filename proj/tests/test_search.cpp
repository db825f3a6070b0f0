#include "lsh/search.hpp"

#include "lsh/csv.hpp"
#include "lsh/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace lsh;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// small structured corpus on disk for end-to-end runs
std::string toy_corpus_file() {
    static const std::string path = "/tmp/lsh_search_corpus.txt";
    static bool written = false;
    if (!written) {
        static const char* words[] = {"the", "cat", "sat", "on", "a", "mat", "dog", "ran",
                                      "then", "slept"};
        Rng rng(99);
        std::string text;
        while (text.size() < 24000) {
            text += words[rng.below(10)];
            text.push_back(' ');
        }
        std::ofstream out(path, std::ios::binary);
        out << text;
        written = true;
    }
    return path;
}

RunConfig toy_config(const std::string& out_dir) {
    RunConfig c;
    c.corpus_path = toy_corpus_file();
    c.train_frac = 0.8;
    c.val_frac = 0.1;
    c.hidden = 8;
    c.embedding = 8;
    c.layers = 2;
    c.sparsity = 0.5;
    c.lr = 1.5;
    c.batch_size = 8;
    c.bptt = 16;
    c.ls_samples = 2;
    c.ls_steps = 30;
    c.ls_warmup = 5;
    c.pool = 8;
    c.epochs_per_event = 1;
    c.selection_epochs = 2;
    c.final_k = 3;
    c.extensive_epochs = 5;
    c.reference_max_epochs = 4;
    c.seed = 7;
    c.out_dir = out_dir;
    return c;
}

}  // namespace

TEST_CASE("pool arithmetic: spec trajectory for n = 24") {
    auto events = simulate_pool(24, 10, 3);
    std::vector<long> sizes;
    for (const auto& e : events) sizes.push_back(e.after);
    // 24 -> 18 -> 13 -> 9 -> 6 -> 3
    CHECK(sizes == std::vector<long>{18, 13, 9, 6, 3});
    CHECK(events[0].kept == 12);
    CHECK(events[0].generated == 6);
}

TEST_CASE("pool arithmetic: floor guard never empties the pool") {
    CHECK(keep_count(1, 1) == 1);
    CHECK(simulate_pool(1, 5, 1).empty());  // already at final_k
    auto events = simulate_pool(2, 5, 3);   // below final_k from the start
    CHECK(events.empty());
}

TEST_CASE("pool arithmetic: generation stops at final_k") {
    // 8 -> keep 4 + gen 2 = 6 -> keep 3 (= final_k) + gen 0 = 3
    auto events = simulate_pool(8, 10, 3);
    REQUIRE(events.size() == 2);
    CHECK(events[0].after == 6);
    CHECK(events[1].kept == 3);
    CHECK(events[1].generated == 0);
    CHECK(events[1].after == 3);
}

TEST_CASE("pool arithmetic matches the recurrence for all n in [1, 64]") {
    const long final_k = 3;
    for (long n = 1; n <= 64; ++n) {
        // oracle: direct recurrence with the stop-at-final_k rule
        std::vector<long> expected;
        long size = n;
        while (size > final_k) {
            long kept = std::min(size, std::max(final_k, size / 2));
            long gen = (kept <= final_k) ? 0 : size / 4;
            size = kept + gen;
            expected.push_back(size);
        }
        auto events = simulate_pool(n, 100, final_k);
        REQUIRE(events.size() == expected.size());
        for (size_t i = 0; i < events.size(); ++i) CHECK(events[i].after == expected[i]);
    }
}

TEST_CASE("grid_candidates: 24 distinct configs at the fixed rate") {
    SamplerSpace space;
    auto grid = grid_candidates(space, 0.8);
    CHECK(grid.size() == 24);
    std::set<std::string> seen;
    for (const auto& c : grid) {
        CHECK(c.death_rate == 0.8);
        seen.insert(std::string(to_string(c.init_mode)) + "/" + to_string(c.death_mode) + "/" +
                    to_string(c.redist_mode));
    }
    CHECK(seen.size() == 24);
    CHECK_THROWS_AS(grid_candidates(space, 0.95), InvalidArgumentError);
}

TEST_CASE("random_propose: in bounds and seed-deterministic") {
    SamplerSpace space;
    Rng a(5), b(5);
    for (int i = 0; i < 20; ++i) {
        auto ca = random_propose(space, a);
        auto cb = random_propose(space, b);
        CHECK(ca.death_rate == cb.death_rate);
        CHECK(ca.death_mode == cb.death_mode);
        CHECK(ca.death_rate >= 0.4);
        CHECK(ca.death_rate <= 0.9);
    }
}

TEST_CASE("tpe_propose: empty archive falls back to uniform, deterministic") {
    SamplerSpace space;
    Rng a(11), b(11);
    auto ca = tpe_propose({}, space, a);
    auto cb = tpe_propose({}, space, b);
    CHECK(ca.death_rate == cb.death_rate);
    CHECK(ca.init_mode == cb.init_mode);
    CHECK(ca.death_rate >= 0.4);
    CHECK(ca.death_rate <= 0.9);
}

TEST_CASE("tpe_propose: concentrates on the good region") {
    SamplerSpace space;
    // good entries (low criterion) all share death_mode = set and rates near
    // 0.45; bad entries use magnitude and rates near 0.85
    std::vector<ArchiveEntry> archive;
    for (int i = 0; i < 8; ++i) {
        ArchiveEntry e;
        e.config.death_mode = DeathMode::set;
        e.config.death_rate = 0.45 + 0.005 * i;
        e.criterion = 0.1 + 0.001 * i;
        archive.push_back(e);
    }
    for (int i = 0; i < 24; ++i) {
        ArchiveEntry e;
        e.config.death_mode = DeathMode::magnitude;
        e.config.death_rate = 0.85;
        e.criterion = 10.0 + i;
        archive.push_back(e);
    }

    Rng rng(21);
    long set_count = 0, low_rate = 0;
    const long draws = 1000;
    for (long i = 0; i < draws; ++i) {
        auto c = tpe_propose(archive, space, rng);
        CHECK(c.death_rate >= 0.4);
        CHECK(c.death_rate <= 0.9);
        if (c.death_mode == DeathMode::set) ++set_count;
        if (c.death_rate < 0.65) ++low_rate;
    }
    // far above the uniform 1/4 for the categorical axis
    CHECK(set_count > draws / 2);
    CHECK(low_rate > draws * 3 / 4);
}

TEST_CASE("rank_candidates: ascending with id tie-break; errors on missing") {
    SearchState state;
    auto add = [&](const std::string& id, double dist) {
        LiveCandidate c;
        c.config.id = id;
        c.latest_distance = dist;
        state.pool.push_back(std::move(c));
    };
    add("c3", 0.1);
    add("c1", 0.5);
    add("c2", 0.1);
    auto order = rank_candidates(state, Criterion::ls_distance);
    CHECK(order == std::vector<std::string>{"c2", "c3", "c1"});

    SearchState single;
    LiveCandidate only;
    only.config.id = "c9";
    only.latest_distance = 1.0;
    single.pool.push_back(std::move(only));
    CHECK(rank_candidates(single, Criterion::ls_distance) == std::vector<std::string>{"c9"});

    LiveCandidate unmeasured;
    unmeasured.config.id = "c4";
    state.pool.push_back(std::move(unmeasured));
    bool threw = false;
    try {
        rank_candidates(state, Criterion::ls_distance);
    } catch (const IncompleteStateError& e) {
        threw = true;
        CHECK(e.candidate_id == "c4");
    }
    CHECK(threw);
}

TEST_CASE("rank_candidates: failed candidates sort last") {
    SearchState state;
    LiveCandidate ok;
    ok.config.id = "c1";
    ok.latest_distance = 5.0;
    LiveCandidate bad;
    bad.config.id = "c0";
    bad.failed = true;
    state.pool.push_back(std::move(ok));
    state.pool.push_back(std::move(bad));
    auto order = rank_candidates(state, Criterion::ls_distance);
    CHECK(order == std::vector<std::string>{"c1", "c0"});
}

TEST_CASE("lsh_run: toy end-to-end emits the full artifact set") {
    const std::string dir = "/tmp/lsh_run_e2e";
    fs::remove_all(dir);
    auto config = toy_config(dir);
    auto report = lsh_run(config);

    CHECK(report.best_val_ppl >= 1.0);
    CHECK(report.best_test_ppl >= 1.0);
    CHECK_FALSE(report.best.id.empty());
    // pool 8, E=1, m=2: events at sizes 8 -> 6 -> 3
    CHECK(report.pool_trajectory == std::vector<long>{6, 3});
    CHECK(report.selection_epochs == 8 + 6);
    CHECK(report.events == 2);

    for (const char* name :
         {"run.json", "report.json", "pool_history.csv", "dense.ckpt", "best.ckpt",
          "spectra/reference.csv", "embedding_1.csv", "embedding_2.csv",
          "metrics/dense.csv"}) {
        CHECK_MESSAGE(fs::exists(dir + "/" + name), name);
    }

    // pool history parses strictly and covers all events
    auto history = read_csv_strict(dir + "/pool_history.csv");
    CHECK(history.header ==
          std::vector<std::string>{"event", "candidate_id", "action", "distance", "val_loss"});
    std::set<std::string> actions;
    for (const auto& row : history.rows) actions.insert(row[2]);
    CHECK(actions.count("kept"));
    CHECK(actions.count("removed"));
    CHECK(actions.count("generated"));

    emit_report_summaries(dir);
    CHECK(fs::exists(dir + "/trajectories.csv"));
    CHECK(fs::exists(dir + "/budget_summary.csv"));
    auto traj = read_csv_strict(dir + "/trajectories.csv");
    // one row per (candidate, epoch) spectrum measurement
    long measurements = 0;
    for (const auto& entry : fs::directory_iterator(dir + "/spectra")) {
        if (entry.path().filename().string() != "reference.csv") ++measurements;
    }
    CHECK(static_cast<long>(traj.rows.size()) == measurements);

    // removed candidates keep their trajectory up to the removal event
    std::set<std::string> in_trajectories;
    for (const auto& row : traj.rows) in_trajectories.insert(row[0]);
    for (const auto& row : history.rows) {
        if (row[2] == "removed") CHECK(in_trajectories.count(row[1]) == 1);
    }

    // every emitted csv parses under the strict reader
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.path().extension() == ".csv") {
            CHECK_NOTHROW(read_csv_strict(entry.path().string()));
        }
    }
}

TEST_CASE("lsh_run: loss-based baseline shares the loop without spectra") {
    const std::string dir = "/tmp/lsh_run_baseline";
    fs::remove_all(dir);
    auto config = toy_config(dir);
    config.criterion = Criterion::val_loss;
    config.pool = 4;
    config.selection_epochs = 1;
    auto report = lsh_run(config);
    CHECK(report.best_val_ppl >= 1.0);
    CHECK_FALSE(fs::exists(dir + "/embedding_1.csv"));
    CHECK_FALSE(fs::exists(dir + "/spectra/reference.csv"));
}

TEST_CASE("lsh_run: deterministic reports, serial vs parallel included") {
    const std::string dir_a = "/tmp/lsh_run_det_a";
    const std::string dir_b = "/tmp/lsh_run_det_b";
    const std::string dir_c = "/tmp/lsh_run_det_c";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    fs::remove_all(dir_c);

    auto config = toy_config(dir_a);
    config.pool = 5;
    config.selection_epochs = 2;
    config.extensive_epochs = 4;
    lsh_run(config);

    config.out_dir = dir_b;
    lsh_run(config);

    config.out_dir = dir_c;
    config.workers = 3;
    lsh_run(config);

    auto report_a = read_file(dir_a + "/report.json");
    CHECK(report_a == read_file(dir_b + "/report.json"));
    CHECK(report_a == read_file(dir_c + "/report.json"));
    CHECK(read_file(dir_a + "/pool_history.csv") == read_file(dir_c + "/pool_history.csv"));
}

TEST_CASE("lsh_run: grid sampler enumerates and only removes") {
    const std::string dir = "/tmp/lsh_run_grid";
    fs::remove_all(dir);
    auto config = toy_config(dir);
    config.sampler = SamplerKind::grid;
    config.selection_epochs = 1;
    config.extensive_epochs = 3;
    auto report = lsh_run(config);
    // grid ignores pool: starts at 24, keeps 12, generates nothing
    CHECK(report.pool_trajectory == std::vector<long>{12});
    auto history = read_csv_strict(dir + "/pool_history.csv");
    for (const auto& row : history.rows) CHECK(row[2] != "generated");
}

TEST_CASE("emit_report_summaries: names missing artifacts") {
    const std::string dir = "/tmp/lsh_report_incomplete";
    fs::remove_all(dir);
    fs::create_directories(dir);
    bool threw = false;
    try {
        emit_report_summaries(dir);
    } catch (const IncompleteArtifactError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("report.json") != std::string::npos);
        CHECK(std::string(e.what()).find("pool_history.csv") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("lsh_run: lock file blocks concurrent writers") {
    const std::string dir = "/tmp/lsh_run_locked";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir + "/.lock") << "held\n";
    auto config = toy_config(dir);
    CHECK_THROWS_AS(lsh_run(config), IoError);
}

TEST_CASE("remove_step: keeps the closest half, removed set is the ranking suffix") {
    SearchState state;
    state.final_k = 3;
    state.criterion = Criterion::ls_distance;
    for (int i = 0; i < 8; ++i) {
        LiveCandidate c;
        c.config.id = "c000" + std::to_string(i);
        c.latest_distance = static_cast<double>((i * 5) % 8);  // scrambled distances
        state.pool.push_back(std::move(c));
    }
    auto ranking = rank_candidates(state, Criterion::ls_distance);
    auto removed = remove_step(state);
    CHECK(state.pool.size() == 4);
    CHECK(removed.size() == 4);
    std::vector<std::string> suffix(ranking.begin() + 4, ranking.end());
    std::sort(suffix.begin(), suffix.end());
    std::sort(removed.begin(), removed.end());
    CHECK(removed == suffix);

    // never empties: single candidate survives its own removal event
    SearchState one;
    one.final_k = 1;
    LiveCandidate only;
    only.config.id = "c0";
    only.latest_distance = 9.9;
    one.pool.push_back(std::move(only));
    CHECK(remove_step(one).empty());
    CHECK(one.pool.size() == 1);
}

TEST_CASE("generate_step: adds fresh candidates, stops at final_k") {
    SearchState state;
    state.final_k = 3;
    long next = 0;
    auto propose = [&] { return CandidateConfig{}; };
    auto materialize = [&](CandidateConfig c) {
        c.id = "g" + std::to_string(next++);
        LiveCandidate cand;
        cand.config = c;
        return cand;
    };
    for (int i = 0; i < 4; ++i) {
        LiveCandidate c;
        c.config.id = "c" + std::to_string(i);
        state.pool.push_back(std::move(c));
    }
    generate_step(state, 2, propose, materialize);
    CHECK(state.pool.size() == 6);
    CHECK(state.pool[4].config.id == "g0");
    CHECK(state.pool[4].epochs_trained == 0);

    // at or below final_k: no generation
    state.pool.resize(3);
    generate_step(state, 2, propose, materialize);
    CHECK(state.pool.size() == 3);
}
